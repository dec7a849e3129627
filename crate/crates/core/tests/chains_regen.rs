use mcmc_cert::chains::finite::{five_state, five_state_split, two_state_control};
use mcmc_cert::chains::normals::cn_drift;
use mcmc_cert::chains::{ContractingNormals, Kernel};
use mcmc_cert::drift::pi_v_bound;
use mcmc_cert::numeric::ks_two_sample;
use mcmc_cert::regen::{
    estimate, lag1_correlation, split_run_finite, split_run_m1, tours, Samples, Scheme, TourBlocks,
};
use mcmc_cert::seeds::stream_rng;
use rayon::prelude::*;

// Lag-1 correlations of tour sums, lengths and tour means, each against
// 3 / sqrt(R).
fn battery(b: &TourBlocks) -> Vec<(f64, f64)> {
    let n: Vec<f64> = b.n.iter().map(|&v| v as f64).collect();
    let means: Vec<f64> = b.s.iter().zip(&n).map(|(s, n)| s / n).collect();
    let lim = 3.0 / (b.len() as f64).sqrt();
    [&b.s, &n, &means].iter().map(|x| (lag1_correlation(x).unwrap(), lim)).collect()
}

#[test]
fn one_step_tours_pass_the_lag_one_battery() {
    let k = ContractingNormals::new(0.5, 1.6226).unwrap();
    let trace = split_run_m1(&k, 0.0, 400_000, &mut stream_rng(41, 0)).unwrap();
    for (r, lim) in battery(&tours(&trace, |x| *x).unwrap()) {
        assert!(r.abs() < lim, "contracting normals: lag-1 {r} vs {lim}");
    }
    let c = two_state_control();
    let trace = split_run_finite(&c, 1, 0.7, &[3.0 / 7.0, 4.0 / 7.0], &[true, true], 0, 200_000, &mut stream_rng(41, 1))
        .unwrap();
    for (r, lim) in battery(&tours(&trace, |x| [1.0, -1.0][*x]).unwrap()) {
        assert!(r.abs() < lim, "two-state: lag-1 {r} vs {lim}");
    }
}

#[test]
fn skeleton_tours_fail_the_lag_one_battery() {
    let (m, eps, nu, cset) = five_state_split();
    let trace = split_run_finite(&five_state(), m, eps, &nu, &cset, 0, 400_000, &mut stream_rng(42, 0)).unwrap();
    let f = [0.0, 1.0, -1.0, 1.0, -1.0];
    let res = battery(&tours(&trace, |x| f[*x]).unwrap());
    assert!(res.iter().any(|(r, lim)| r.abs() > *lim), "{res:?}");
}

// Split and plain simulation must give the same law at a fixed time.
#[test]
fn split_chain_keeps_the_marginals() {
    let k = ContractingNormals::new(0.7, 1.6226).unwrap();
    let (runs, t, x0) = (3000, 8, 2.5);
    let split: Vec<f64> = (0..runs)
        .map(|r| split_run_m1(&k, x0, t + 1, &mut stream_rng(43, r)).unwrap().states[t])
        .collect();
    let plain: Vec<f64> = (0..runs).map(|r| k.run(x0, t, &mut stream_rng(44, r))[t]).collect();
    let fns: [fn(f64) -> f64; 3] = [|x| x, |x| x * x, f64::cos];
    for (i, f) in fns.iter().enumerate() {
        let a: Vec<f64> = split.iter().map(|&x| f(x)).collect();
        let b: Vec<f64> = plain.iter().map(|&x| f(x)).collect();
        let (d, p) = ks_two_sample(&a, &b);
        assert!(p > 0.01 / 3.0, "functional {i}: KS {d}, p {p}");
    }
}

fn rmse(scheme: impl Fn(usize, u64) -> f64 + Sync, n: usize, reps: u64) -> f64 {
    let ss: f64 = (0..reps).into_par_iter().map(|r| scheme(n, r).powi(2)).sum();
    (ss / reps as f64).sqrt()
}

// Quadrupling the sample size halves the root mean square error.
#[test]
fn estimators_are_root_n_consistent() {
    let k = ContractingNormals::new(0.5, 1.6226).unwrap();
    let x0 = 1.0;
    let walk = |len: usize, seed: u64, stream: u64| -> Vec<f64> { k.run(x0, len - 1, &mut stream_rng(seed, stream)) };
    let one = |n: usize, r: u64| {
        estimate(Samples::Walk(&walk(20 + n, 1, r)), Scheme::OneWalk { t: 20, n }).unwrap()
    };
    let spaced = |n: usize, r: u64| {
        estimate(Samples::Walk(&walk(3 * (10 + n), 2, r)), Scheme::Spaced { t: 10, n, s: 3 }).unwrap()
    };
    let multi = |n: usize, r: u64| {
        let runs: Vec<Vec<f64>> = (0..n as u64).map(|j| walk(11, 3, r * 1_000_000 + j)).collect();
        estimate(Samples::Runs(&runs), Scheme::MultiRun { t: 10, n }).unwrap()
    };
    let median = |n: usize, r: u64| {
        let runs: Vec<Vec<f64>> = (0..5).map(|j| walk(20 + n, 4, r * 8 + j)).collect();
        estimate(Samples::Runs(&runs), Scheme::Median { t: 20, n, m: 5 }).unwrap()
    };
    let reps = 1000;
    for (name, ratio) in [
        ("one-walk", rmse(one, 16_000, reps) / rmse(one, 4000, reps)),
        ("spaced", rmse(spaced, 16_000, reps) / rmse(spaced, 4000, reps)),
        ("multi-run", rmse(multi, 1600, reps) / rmse(multi, 400, reps)),
        ("median", rmse(median, 8000, reps) / rmse(median, 2000, reps)),
    ] {
        assert!((0.4..0.62).contains(&ratio), "{name}: error ratio {ratio}");
    }
}

#[test]
fn empirical_pi_v_below_its_bound() {
    for (theta, c) in [(0.5, 1.6226), (0.9, 2.0), (-0.6, 1.5)] {
        let (dp, _) = cn_drift(theta, c).unwrap();
        let k = ContractingNormals::new(theta, c).unwrap();
        let n = 1_000_000;
        let path = k.run(0.0, n, &mut stream_rng(45, 0));
        let pi_v = path[1000..].iter().map(|x| 1.0 + x * x).sum::<f64>() / (n - 999) as f64;
        assert!(pi_v <= pi_v_bound(&dp), "theta {theta}: {pi_v} > {}", pi_v_bound(&dp));
    }
}
