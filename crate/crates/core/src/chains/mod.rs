//! Concrete Markov kernels and the drift/minorization calculators that go
//! with them.

pub mod finite;
pub mod hrem;
pub mod hrem_bounds;
pub mod normals;

use rand::Rng;

pub use finite::FiniteChain;
pub use normals::ContractingNormals;

/// A Markov transition kernel that can be simulated from an explicit
/// randomness stream.
pub trait Kernel {
    type State: Clone;

    fn step<R: Rng + ?Sized>(&self, x: &Self::State, rng: &mut R) -> Self::State;

    /// `n` steps from `x0`; returns `n + 1` states including `x0`.
    fn run<R: Rng + ?Sized>(&self, x0: Self::State, n: usize, rng: &mut R) -> Vec<Self::State> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(x0);
        for i in 0..n {
            let next = self.step(&out[i], rng);
            out.push(next);
        }
        out
    }
}

/// One-step minorization `P(x, dy) >= s(x) nu(dy)` together with the
/// densities needed for retrospective bell sampling.
pub trait SplitMinorization: Kernel {
    fn s(&self, x: &Self::State) -> f64;
    /// Density of `nu`.
    fn nu_density(&self, y: &Self::State) -> f64;
    /// Density of `P(x, .)` at `y`.
    fn transition_density(&self, x: &Self::State, y: &Self::State) -> f64;

    /// Constant `epsilon` when `s = epsilon 1_C`.
    fn epsilon(&self) -> Option<f64> {
        None
    }
}
