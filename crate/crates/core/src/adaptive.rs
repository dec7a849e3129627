//! Adaptive Monte Carlo on `{0, 1}`: a runner for path-dependent kernel
//! choice, the two toy policies built from the uniform kernel `P1` and the
//! lazy kernel `P2 = (1 - eps) I + eps P1`, and the bound `B(c1, c2, n)`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chains::finite::{adaptive_p1, adaptive_p2};
use crate::chains::{FiniteChain, Kernel};
use crate::error::{Error, Result};
use crate::seeds::stream_rng;

/// Chooses the kernel for the move out of `path[path.len() - 1]` from the
/// whole path so far. Must not depend on anything else.
pub trait AdaptivePolicy {
    type K: Kernel;

    fn kernel(&self, path: &[<Self::K as Kernel>::State]) -> &Self::K;
}

/// `n` adaptive steps from `x0`; returns `n + 1` states.
pub fn run_adaptive<P, R>(policy: &P, x0: <P::K as Kernel>::State, n: usize, rng: &mut R) -> Vec<<P::K as Kernel>::State>
where
    P: AdaptivePolicy,
    R: Rng + ?Sized,
{
    let mut path = Vec::with_capacity(n + 1);
    path.push(x0);
    for _ in 0..n {
        let next = policy.kernel(&path).step(&path[path.len() - 1], rng);
        path.push(next);
    }
    path
}

/// Always the same kernel.
#[derive(Debug, Clone)]
pub struct ConstantPolicy(pub FiniteChain);

impl AdaptivePolicy for ConstantPolicy {
    type K = FiniteChain;

    fn kernel(&self, _: &[usize]) -> &FiniteChain {
        &self.0
    }
}

/// Kernel `k` is `P1` when `schedule[k]` holds, else `P2`. The schedule
/// repeats when the run is longer.
#[derive(Debug, Clone)]
pub struct InhomogeneousPolicy {
    p1: FiniteChain,
    p2: FiniteChain,
    schedule: Vec<bool>,
}

impl InhomogeneousPolicy {
    pub fn from_schedule(eps: f64, schedule: Vec<bool>) -> Result<Self> {
        if schedule.is_empty() {
            return Err(Error::validation("kernel schedule is empty"));
        }
        Ok(InhomogeneousPolicy { p1: adaptive_p1(), p2: adaptive_p2(eps)?, schedule })
    }

    pub fn schedule(&self) -> &[bool] {
        &self.schedule
    }
}

impl AdaptivePolicy for InhomogeneousPolicy {
    type K = FiniteChain;

    fn kernel(&self, path: &[usize]) -> &FiniteChain {
        if self.schedule[(path.len() - 1) % self.schedule.len()] {
            &self.p1
        } else {
            &self.p2
        }
    }
}

/// Draws `n` kernels i.i.d. with `P(P1) = phi_p1`.
pub fn policy_inhomogeneous<R: Rng + ?Sized>(phi_p1: f64, eps: f64, n: usize, rng: &mut R) -> Result<InhomogeneousPolicy> {
    if !(0.0..=1.0).contains(&phi_p1) {
        return Err(Error::validation(format!("phi(P1) must lie in [0, 1], got {phi_p1}")));
    }
    let schedule = (0..n.max(1)).map(|_| rng.random::<f64>() < phi_p1).collect();
    InhomogeneousPolicy::from_schedule(eps, schedule)
}

/// `P1` after a 0, `P2` after a 1.
#[derive(Debug, Clone)]
pub struct TrapPolicy {
    p1: FiniteChain,
    p2: FiniteChain,
}

impl AdaptivePolicy for TrapPolicy {
    type K = FiniteChain;

    fn kernel(&self, path: &[usize]) -> &FiniteChain {
        if path[path.len() - 1] == 0 {
            &self.p1
        } else {
            &self.p2
        }
    }
}

pub fn policy_trap(eps: f64) -> Result<TrapPolicy> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::validation(format!("eps must lie in (0, 1], got {eps}")));
    }
    Ok(TrapPolicy { p1: adaptive_p1(), p2: adaptive_p2(eps)? })
}

/// The trapped process is itself the Markov chain
/// `Q = [[1/2, 1/2], [eps/2, 1 - eps/2]]`.
pub fn trap_induced_chain(eps: f64) -> Result<FiniteChain> {
    policy_trap(eps)?;
    FiniteChain::unlabelled(vec![vec![0.5, 0.5], vec![eps / 2.0, 1.0 - eps / 2.0]])
}

/// Long-run probability of state 1 under the trap policy.
pub fn trap_stationary_one(eps: f64) -> f64 {
    1.0 / (1.0 + eps)
}

/// `P(no P1 among the first n kernels) = (1 - phi_p1)^n`, which bounds
/// the distance to uniform after `n` inhomogeneous steps.
pub fn inhomogeneous_tv_bound(phi_p1: f64, n: u32) -> f64 {
    (1.0 - phi_p1).powi(n as i32)
}

/// Per-step `P(X_k = 1)` over `reps` independent runs from `x0`. Each
/// replication gets stream `r` of `seed`, and builds its own policy from
/// that stream before running.
pub fn state_one_frequencies<P, F>(make: F, x0: usize, n: usize, reps: usize, seed: u64) -> Vec<f64>
where
    P: AdaptivePolicy<K = FiniteChain>,
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> P + Sync,
{
    let counts = (0..reps)
        .into_par_iter()
        .fold(
            || vec![0u64; n + 1],
            |mut acc, r| {
                let mut rng = stream_rng(seed, r as u64);
                let policy = make(&mut rng);
                for (k, &x) in run_adaptive(&policy, x0, n, &mut rng).iter().enumerate() {
                    acc[k] += x as u64;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; n + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    counts.into_iter().map(|c| c as f64 / reps as f64).collect()
}

/// Total-variation distance of a law on `{0, 1}` from uniform.
pub fn tv_to_uniform(p_one: f64) -> f64 {
    (p_one - 0.5).abs()
}

/// Sequences `(tau_n)`, `(a_n)`, `(R_n)`, indexed from `n = 0`, with
/// `phi_n = a_1 + ... + a_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSequences {
    pub tau: Vec<f64>,
    pub a: Vec<f64>,
    pub r: Vec<f64>,
    phi: Vec<f64>,
}

impl BoundSequences {
    pub fn new(tau: Vec<f64>, a: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        if a.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::validation("a_n must be nonnegative"));
        }
        if tau.iter().chain(&r).any(|v| !v.is_finite()) {
            return Err(Error::validation("tau_n and R_n must be finite"));
        }
        let mut phi = Vec::with_capacity(a.len());
        let mut acc = 0.0;
        for (k, &ak) in a.iter().enumerate() {
            if k > 0 {
                acc += ak;
            }
            phi.push(acc);
        }
        Ok(BoundSequences { tau, a, r, phi })
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
}

/// `B(c1, c2, n) = min_{1 <= k <= n} (c1 phi_k tau_{n-k} + c2 R_k)`.
#[allow(non_snake_case)]
pub fn bound_B(c1: f64, c2: f64, n: usize, seqs: &BoundSequences) -> Result<f64> {
    if n == 0 {
        return Err(Error::validation("n must be at least 1"));
    }
    let need = n + 1;
    if seqs.tau.len() < need || seqs.a.len() < need || seqs.r.len() < need {
        return Err(Error::insufficient(format!("sequences must have at least {need} terms")));
    }
    Ok((1..=n)
        .map(|k| c1 * seqs.phi[k] * seqs.tau[n - k] + c2 * seqs.r[k])
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_length_and_constant_policy() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let p = run_adaptive(&ConstantPolicy(adaptive_p1()), 0, 37, &mut rng);
        assert_eq!(p.len(), 38);
        let f = state_one_frequencies(|_| ConstantPolicy(adaptive_p1()), 0, 3, 40_000, 5);
        assert_eq!(f[0], 0.0);
        assert!(tv_to_uniform(f[1]) < 0.01);
    }

    #[test]
    fn trap_balance_equations() {
        for eps in [0.1, 0.5, 1.0] {
            let pi = trap_induced_chain(eps).unwrap().stationary().unwrap();
            assert!((pi[1] - trap_stationary_one(eps)).abs() < 1e-14);
        }
        assert!((trap_stationary_one(0.1) - 10.0 / 11.0).abs() < 1e-15);
        assert_eq!(trap_stationary_one(1.0), 0.5);
    }

    #[test]
    fn cycling_schedule() {
        let pol = InhomogeneousPolicy::from_schedule(0.1, vec![true, false]).unwrap();
        let p1 = adaptive_p1();
        let p2 = adaptive_p2(0.1).unwrap();
        assert_eq!(pol.kernel(&[0]).matrix(), p1.matrix());
        assert_eq!(pol.kernel(&[0, 1]).matrix(), p2.matrix());
        assert_eq!(pol.kernel(&[0, 1, 1]).matrix(), p1.matrix());
    }

    #[test]
    fn point_mass_on_p1_is_uniform_at_once() {
        let f = state_one_frequencies(
            |rng| policy_inhomogeneous(1.0, 0.1, 10, rng).unwrap(),
            0,
            10,
            40_000,
            6,
        );
        for &p in &f[1..] {
            assert!(tv_to_uniform(p) < 0.01, "{p}");
        }
    }

    #[test]
    fn bound_b_special_cases() {
        let n = 30;
        let tau: Vec<f64> = (0..=n).map(|k| 0.5f64.powi(k as i32)).collect();
        let s = BoundSequences::new(tau.clone(), vec![1.0; n + 1], tau.clone()).unwrap();
        assert_eq!(s.phi()[5], 5.0);
        // c1 = 0: running minimum of R.
        assert_eq!(bound_B(0.0, 2.0, 10, &s).unwrap(), 2.0 * tau[10]);
        // Scan by hand for n = 3: k=1: 1*1/4 + 1/2, k=2: 2*1/2 + 1/4, k=3: 3*1 + 1/8.
        assert_eq!(bound_B(1.0, 1.0, 3, &s).unwrap(), 0.75);
        assert!(bound_B(1.0, 1.0, n + 1, &s).is_err());
        assert!(bound_B(1.0, 1.0, 0, &s).is_err());
        assert!(BoundSequences::new(vec![1.0], vec![-1.0], vec![1.0]).is_err());
    }
}
