//! Split-chain simulation and regenerative output analysis.
//!
//! A split trace pairs a trajectory `X_0, X_1, ...` with one bell `Y_n`
//! per skeleton step `X_{nm} -> X_{(n+1)m}`. A bell marks that
//! `X_{(n+1)m}` was drawn from the minorizing measure, so the trajectory
//! cut just before it falls into tours.

mod estimators;
mod fixed_width;
mod probe;
mod stream;
mod trace_io;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::chains::{FiniteChain, SplitMinorization};
use crate::error::{Error, Result};

pub use estimators::{
    batch_means_var, estimate, lag1_correlation, median_of_averages, multi_run, one_walk, regen_estimates,
    regen_sigma2, spaced, RegenEstimates, Samples, Scheme,
};
pub use fixed_width::{fixed_width_batch_means, fixed_width_run, FixedWidthConfig, FixedWidthMethod, FixedWidthResult};
pub use probe::{
    boundary_joint_exact, boundary_pairs, dependence_probe, tour_dependence_probe, two_state_control_probe,
    DependenceReport,
};
pub use stream::{stream_walk, WalkSummary, WalkWindow};
pub use trace_io::{write_trace_csv, TraceState};

/// Slack allowed on the retrospective bell probability before it is
/// reported as a minorization violation.
pub const BELL_SLACK: f64 = 1e-9;

/// A simulated split chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitTrace<S> {
    /// `X_0, ..., X_{nm-1}`.
    pub states: Vec<S>,
    /// `Y_0, ..., Y_{n-1}`.
    pub bells: Vec<bool>,
    pub m: u32,
    pub epsilon: Option<f64>,
    /// Skeleton indices `n` with `Y_n = 1`.
    pub regenerations: Vec<usize>,
}

impl<S> SplitTrace<S> {
    fn from_parts(states: Vec<S>, bells: Vec<bool>, m: u32, epsilon: Option<f64>) -> Self {
        let regenerations = bells.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        SplitTrace { states, bells, m, epsilon, regenerations }
    }

    pub fn bell_frequency(&self) -> f64 {
        self.regenerations.len() as f64 / self.bells.len().max(1) as f64
    }

    /// State index right after each bell, where a tour begins.
    pub fn tour_boundaries(&self) -> Vec<usize> {
        let m = self.m as usize;
        self.regenerations.iter().map(|&n| (n + 1) * m).collect()
    }
}

/// Simulates `n` steps of the one-step split chain by drawing the move from
/// the kernel and the bell afterwards from
/// `Bernoulli(s(X_i) v(X_{i+1}) / k(X_{i+1} | X_i))`.
pub fn split_run_m1<K, R>(kernel: &K, x0: K::State, n: usize, rng: &mut R) -> Result<SplitTrace<K::State>>
where
    K: SplitMinorization,
    R: Rng + ?Sized,
{
    let mut states = Vec::with_capacity(n);
    let mut bells = Vec::with_capacity(n);
    let mut x = x0;
    for i in 0..n {
        let y = kernel.step(&x, rng);
        let bell = retrospective_bell(kernel, &x, &y, rng).map_err(|e| at_step(e, i))?;
        states.push(x);
        bells.push(bell);
        x = y;
    }
    Ok(SplitTrace::from_parts(states, bells, 1, kernel.epsilon()))
}

/// Draws `Y ~ Bernoulli(s(x) v(y) / k(y | x))` for an observed move `x -> y`.
pub(crate) fn retrospective_bell<K, R>(kernel: &K, x: &K::State, y: &K::State, rng: &mut R) -> Result<bool>
where
    K: SplitMinorization,
    R: Rng + ?Sized,
{
    let s = kernel.s(x);
    if s <= 0.0 {
        return Ok(false);
    }
    let num = s * kernel.nu_density(y);
    let p = if num == 0.0 { 0.0 } else { num / kernel.transition_density(x, y) };
    if !(-BELL_SLACK..=1.0 + BELL_SLACK).contains(&p) {
        return Err(Error::validation(format!("minorization violated: s(x) v(y) / k(y|x) = {p}")));
    }
    Ok(rng.random::<f64>() < p)
}

fn at_step(e: Error, i: usize) -> Error {
    match e {
        Error::Validation(m) => Error::Validation(format!("{m} at step {i}")),
        other => other,
    }
}

/// Exact simulation of the split `m`-skeleton of a finite chain under
/// `P^m(x, .) >= epsilon 1_C(x) nu_m(.)`, including the intermediate
/// states of every skeleton step.
#[allow(clippy::too_many_arguments)]
pub fn split_run_finite<R: Rng + ?Sized>(
    chain: &FiniteChain,
    m: u32,
    epsilon: f64,
    nu_m: &[f64],
    small_set: &[bool],
    x0: usize,
    n: usize,
    rng: &mut R,
) -> Result<SplitTrace<usize>> {
    chain.check_minorization(m, epsilon, nu_m, small_set)?;
    let k = chain.n_states();
    if x0 >= k {
        return Err(Error::validation(format!("start state {x0} out of range")));
    }
    let mu = m as usize;
    // powers[j] = P^j
    let mut powers: Vec<DMatrix<f64>> = vec![DMatrix::identity(k, k)];
    for j in 1..=mu {
        powers.push(&powers[j - 1] * chain.matrix());
    }
    let pm = &powers[mu];
    let residual: Vec<Vec<f64>> = (0..k)
        .map(|x| {
            let e = if small_set[x] { epsilon } else { 0.0 };
            if e >= 1.0 {
                return vec![0.0; k];
            }
            (0..k).map(|y| ((pm[(x, y)] - e * nu_m[y]) / (1.0 - e)).max(0.0)).collect()
        })
        .collect();

    let mut states = Vec::with_capacity(n * mu);
    let mut bells = Vec::with_capacity(n);
    let mut x = x0;
    let mut w = vec![0.0; k];
    for _ in 0..n {
        let e = if small_set[x] { epsilon } else { 0.0 };
        let bell = e > 0.0 && rng.random::<f64>() < e;
        let y = if bell { draw(nu_m, rng)? } else { draw(&residual[x], rng)? };
        states.push(x);
        let mut cur = x;
        for j in 1..mu {
            let rest = &powers[mu - j];
            for (z, wz) in w.iter_mut().enumerate() {
                *wz = chain.prob(cur, z) * rest[(z, y)];
            }
            cur = draw(&w, rng)?;
            states.push(cur);
        }
        bells.push(bell);
        x = y;
    }
    Ok(SplitTrace::from_parts(states, bells, m, Some(epsilon)))
}

fn draw<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> Result<usize> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::numeric("bridge weights vanish"));
    }
    let mut u = rng.random::<f64>() * total;
    for (i, &wi) in w.iter().enumerate() {
        if u < wi {
            return Ok(i);
        }
        u -= wi;
    }
    Ok(w.iter().rposition(|&v| v > 0.0).expect("positive total"))
}

/// Per-tour sums `s_i` and lengths `N_i` (in steps of the underlying
/// chain, so `N_i` is a multiple of `m`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TourBlocks {
    pub s: Vec<f64>,
    pub n: Vec<u64>,
    pub m: u32,
}

impl TourBlocks {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn total_length(&self) -> u64 {
        self.n.iter().sum()
    }

    pub fn mean_length(&self) -> f64 {
        self.total_length() as f64 / self.len() as f64
    }
}

/// Cuts a trace into complete tours and sums `f` over each.
pub fn tours<S, F: Fn(&S) -> f64>(trace: &SplitTrace<S>, f: F) -> Result<TourBlocks> {
    let starts = trace.tour_boundaries();
    if starts.len() < 2 {
        return Err(Error::insufficient(format!("{} regenerations, need at least 2", starts.len())));
    }
    let mut s = Vec::with_capacity(starts.len() - 1);
    let mut n = Vec::with_capacity(starts.len() - 1);
    for w in starts.windows(2) {
        s.push(trace.states[w[0]..w[1]].iter().map(&f).sum());
        n.push((w[1] - w[0]) as u64);
    }
    Ok(TourBlocks { s, n, m: trace.m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::finite::{five_state, five_state_split, two_state_control};
    use crate::chains::normals::cn_step;
    use crate::chains::{ContractingNormals, Kernel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// The i.i.d. kernel `P(x, .) = nu`.
    struct Iid;

    impl Kernel for Iid {
        type State = f64;
        fn step<R: Rng + ?Sized>(&self, _: &f64, rng: &mut R) -> f64 {
            rng.random()
        }
    }

    impl SplitMinorization for Iid {
        fn s(&self, _: &f64) -> f64 {
            1.0
        }
        fn nu_density(&self, _: &f64) -> f64 {
            1.0
        }
        fn transition_density(&self, _: &f64, _: &f64) -> f64 {
            1.0
        }
    }

    #[test]
    fn iid_kernel_rings_every_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = split_run_m1(&Iid, 0.5, 500, &mut rng).unwrap();
        assert!(t.bells.iter().all(|&b| b));
        assert_eq!(t.states.len(), t.bells.len());
        let tb = tours(&t, |_| 1.0).unwrap();
        assert!(tb.n.iter().all(|&n| n == 1));
    }

    #[test]
    fn bell_frequency_matches_beta_pi_c() {
        let k = ContractingNormals::new(0.5, 1.6226).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 400_000;
        let t = split_run_m1(&k, 0.0, n, &mut rng).unwrap();
        let p = k.beta_tilde() * k.pi_c();
        let freq = t.bell_frequency();
        let ind: Vec<f64> = t.bells.iter().map(|&b| b as u8 as f64).collect();
        let sd = (batch_means_var(&ind, 0.5).unwrap() / n as f64).sqrt();
        assert!((freq - p).abs() < 3.0 * sd, "{freq} vs {p}");
    }

    #[test]
    fn split_preserves_lag_one_autocorrelation() {
        let theta = 0.5;
        let k = ContractingNormals::new(theta, 1.6226).unwrap();
        let n = 200_000;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let split = split_run_m1(&k, 0.0, n, &mut rng).unwrap().states;
        let mut raw = Vec::with_capacity(n);
        let mut x = 0.0;
        for _ in 0..n {
            raw.push(x);
            x = cn_step(theta, x, &mut rng);
        }
        let r1 = lag1_correlation(&split).unwrap();
        let r2 = lag1_correlation(&raw).unwrap();
        assert!((r1 - r2).abs() < 6.0 / (n as f64).sqrt(), "{r1} vs {r2}");
    }

    #[test]
    fn minorization_violation_is_reported() {
        struct Bad;
        impl Kernel for Bad {
            type State = f64;
            fn step<R: Rng + ?Sized>(&self, _: &f64, rng: &mut R) -> f64 {
                rng.random()
            }
        }
        impl SplitMinorization for Bad {
            fn s(&self, _: &f64) -> f64 {
                0.9
            }
            fn nu_density(&self, y: &f64) -> f64 {
                2.0 * y
            }
            fn transition_density(&self, _: &f64, _: &f64) -> f64 {
                1.0
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(matches!(split_run_m1(&Bad, 0.5, 1000, &mut rng), Err(Error::Validation(_))));
    }

    #[test]
    fn five_state_split_reproduces_transitions_and_bells() {
        let c = five_state();
        let (m, eps, nu, cset) = five_state_split();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = split_run_finite(&c, m, eps, &nu, &cset, 0, 100_000, &mut rng).unwrap();
        assert_eq!(t.bells.len(), t.states.len() / m as usize);
        let mut counts = [[0u64; 5]; 5];
        for w in t.states.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
        for (i, row) in counts.iter().enumerate() {
            let tot: u64 = row.iter().sum();
            for (j, &cnt) in row.iter().enumerate() {
                let p = c.prob(i, j);
                let sd = (p * (1.0 - p) / tot as f64).sqrt();
                assert!((cnt as f64 / tot as f64 - p).abs() <= 3.0 * sd + 1e-12, "{i}->{j}");
            }
        }
        let freq = t.bell_frequency();
        let sd = (eps * (1.0 - eps) / t.bells.len() as f64).sqrt();
        assert!((freq - eps).abs() < 3.0 * sd);
        // Every tour starts at d or e.
        for s in t.tour_boundaries() {
            if s < t.states.len() {
                assert!(t.states[s] == 3 || t.states[s] == 4);
            }
        }
    }

    #[test]
    fn bells_follow_epsilon_on_c_only() {
        let c = FiniteChain::unlabelled(vec![vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap();
        let nu = [0.4, 0.6];
        let cset = [true, false];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = split_run_finite(&c, 1, 0.8, &nu, &cset, 0, 50_000, &mut rng).unwrap();
        let (mut in_c, mut rung) = (0u64, 0u64);
        for (i, &b) in t.bells.iter().enumerate() {
            if t.states[i] == 1 {
                assert!(!b);
            } else {
                in_c += 1;
                rung += b as u64;
            }
        }
        let f = rung as f64 / in_c as f64;
        assert!((f - 0.8).abs() < 3.0 * (0.16 / in_c as f64).sqrt());
    }

    #[test]
    fn rejects_invalid_minorization() {
        let c = five_state();
        let (m, _, nu, cset) = five_state_split();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(split_run_finite(&c, m, 0.3, &nu, &cset, 0, 10, &mut rng).is_err());
    }

    #[test]
    fn tour_counting_identity() {
        let c = two_state_control();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = split_run_m1(&c, 0, 10_000, &mut rng).unwrap();
        let tb = tours(&t, |_| 1.0).unwrap();
        assert_eq!(tb.s.iter().map(|&v| v as u64).collect::<Vec<_>>(), tb.n);
        let r = &t.regenerations;
        assert_eq!(tb.total_length(), (r[r.len() - 1] - r[0]) as u64);
        assert_eq!(tb.len(), r.len() - 1);
    }

    #[test]
    fn too_few_regenerations() {
        let t = SplitTrace::from_parts(vec![0.0; 4], vec![false, true, false, false], 1, None);
        assert!(matches!(tours(&t, |x| *x), Err(Error::InsufficientData(_))));
    }
}
