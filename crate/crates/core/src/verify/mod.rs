//! The acceptance suite: one function per criterion, each returning a
//! report with its sub-checks. Shared by `mcmc-cert verify` and the
//! `acceptance` test target.

pub mod oracles;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::adaptive::{
    policy_inhomogeneous, policy_trap, run_adaptive, state_one_frequencies, trap_induced_chain, trap_stationary_one,
    tv_to_uniform,
};
use crate::chains::finite::{five_state, five_state_split};
use crate::chains::hrem::{
    block_gibbs_step, fixed_scan_step, synthetic_balanced, HremState, SYNTHETIC_BLOCK_LAMBDA_R, SYNTHETIC_BLOCK_PHI,
};
use crate::chains::hrem_bounds::{
    block_minorization, gibbs_minorization_terms, hrem_minorization_scan, hrem_plan, BlockPhi, HremPlanSettings,
    HremTarget,
};
use crate::chains::normals::{cn_drift, cn_plan_problem, cn_step};
use crate::chains::ContractingNormals;
use crate::drift::{pi_v_bound, power_transform, DriftParams};
use crate::error::Result;
use crate::numeric::ks_two_sample;
use crate::planner::{mse_bound, plan_median, plan_one_walk, MseInputs, Start, DEFAULT_A};
use crate::ratebounds::{argmax_r1, geometry, rho, solve_r1};
use crate::regen::{
    batch_means_var, fixed_width_batch_means, regen_estimates, regen_sigma2, split_run_finite, split_run_m1,
    tour_dependence_probe, tours, two_state_control_probe, FixedWidthConfig, FixedWidthMethod,
};
use crate::seeds::stream_rng;

/// Criteria that may simulate more chain steps than this are skipped
/// under `--quick`.
pub const QUICK_STEP_LIMIT: u64 = 100_000_000;

pub const CRITERIA: [(u32, &str); 11] = [
    (1, "rate and plan constants, single walk at alpha = 0.1"),
    (2, "single walk at alpha = 1e-5 and median plan"),
    (3, "root and argmax against grid oracles"),
    (4, "drift-bound soundness on contracting normals"),
    (5, "batch-means and regenerative variance"),
    (6, "fixed-width coverage"),
    (7, "split-chain fidelity"),
    (8, "dependent tours at m = 4"),
    (9, "tour-based asymptotic variance"),
    (10, "adaptive dichotomy"),
    (11, "HREM end to end"),
];

/// Worst-case total chain steps simulated by a criterion.
fn step_budget(id: u32) -> u64 {
    match id {
        4 => 11_000_000,
        5 | 9 => 1_000_000,
        6 => 200 * 10_000_000,
        7 => 400_000,
        8 => 3_500_000,
        10 => 20_000_000,
        11 => 200_000,
        _ => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub quick: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubCheck {
    pub name: String,
    pub observed: f64,
    pub expected: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub skipped: bool,
    pub seconds: f64,
    pub checks: Vec<SubCheck>,
    pub error: Option<String>,
}

impl CriterionReport {
    pub fn status(&self) -> &'static str {
        match (self.skipped, self.pass) {
            (true, _) => "SKIP",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        }
    }
}

#[derive(Default)]
struct Checks(Vec<SubCheck>);

impl Checks {
    fn push(&mut self, name: &str, observed: f64, expected: String, pass: bool) {
        self.0.push(SubCheck { name: name.to_string(), observed, expected, pass });
    }

    fn abs(&mut self, name: &str, observed: f64, target: f64, tol: f64) {
        self.push(name, observed, format!("{target} +/- {tol}"), (observed - target).abs() <= tol);
    }

    fn rel(&mut self, name: &str, observed: f64, target: f64, tol: f64) {
        self.push(
            name,
            observed,
            format!("{target} +/- {}%", tol * 100.0),
            ((observed - target) / target).abs() <= tol,
        );
    }

    fn below(&mut self, name: &str, observed: f64, limit: f64) {
        self.push(name, observed, format!("< {limit}"), observed < limit);
    }

    fn at_least(&mut self, name: &str, observed: f64, limit: f64) {
        self.push(name, observed, format!(">= {limit}"), observed >= limit);
    }
}

/// Runs one criterion. Errors inside the criterion count as failures.
pub fn run_criterion(id: u32, opts: &VerifyOptions) -> CriterionReport {
    let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown criterion", |c| c.1).to_string();
    if opts.quick && step_budget(id) > QUICK_STEP_LIMIT {
        return CriterionReport { id, name, pass: true, skipped: true, seconds: 0.0, checks: vec![], error: None };
    }
    let start = Instant::now();
    let mut checks = Checks::default();
    let seed = stream_rng(opts.seed, id as u64).random::<u64>();
    let outcome = match id {
        1 => criterion_1(&mut checks),
        2 => criterion_2(&mut checks),
        3 => criterion_3(&mut checks, seed),
        4 => criterion_4(&mut checks, seed),
        5 => criterion_5(&mut checks, seed),
        6 => criterion_6(&mut checks, seed),
        7 => criterion_7(&mut checks, seed),
        8 => criterion_8(&mut checks, seed),
        9 => criterion_9(&mut checks, seed),
        10 => criterion_10(&mut checks, seed),
        11 => criterion_11(&mut checks, seed),
        _ => Err(crate::error::Error::validation(format!("no acceptance criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    if let Some(limit) = runtime_limit(id) {
        checks.below("runtime (s)", seconds, limit);
    }
    let error = outcome.err().map(|e| e.to_string());
    let pass = error.is_none() && !checks.0.is_empty() && checks.0.iter().all(|c| c.pass);
    CriterionReport { id, name, pass, skipped: false, seconds, checks: checks.0, error }
}

fn runtime_limit(id: u32) -> Option<f64> {
    match id {
        1 => Some(1.0),
        3 => Some(10.0),
        4 | 5 => Some(60.0),
        6 => Some(600.0),
        11 => Some(300.0),
        _ => None,
    }
}

/// All criteria in order.
pub fn run_suite(opts: &VerifyOptions) -> Vec<CriterionReport> {
    CRITERIA.iter().map(|&(id, _)| run_criterion(id, opts)).collect()
}

fn table_inputs() -> Result<(DriftParams, MseInputs)> {
    let problem = cn_plan_problem(0.5, 1.6226)?;
    Ok((problem.drift, problem.inputs(0.915, 0.971)?))
}

fn criterion_1(c: &mut Checks) -> Result<()> {
    let (dp, class) = cn_drift(0.5, 1.6226)?;
    let (_, inp) = table_inputs()?;
    c.abs("rho", rho(&dp, class)?, 0.895, 0.001);
    c.abs("rho_2", rho(&power_transform(&dp, 2.0)?, class)?, 0.899, 0.001);
    c.rel("M(0.915)", inp.rate_v.m, 36436.0, 0.01);
    c.rel("M_2(0.971)", inp.rate_vr.m, 748.0, 0.01);
    let plan = plan_one_walk(0.1, 0.1, &inp, Some(1.0))?;
    c.abs("t", plan.t as f64, 218.0, 1.0);
    c.rel("n", plan.n as f64, 6.46e9, 0.02);
    Ok(())
}

fn criterion_2(c: &mut Checks) -> Result<()> {
    let (_, inp) = table_inputs()?;
    let one = plan_one_walk(0.1, 1e-5, &inp, Some(1.0))?;
    c.rel("single-walk n at alpha 1e-5", one.n as f64, 6.46e13, 0.02);
    let med = plan_median(0.1, 1e-5, Some(DEFAULT_A), None, &inp, Some(1.0))?;
    c.push("median m", med.m as f64, "27".into(), med.m == 27);
    c.rel("median n", med.n as f64, 5.39e9, 0.02);
    c.rel("median total cost", med.total_cost as f64, 1.46e11, 0.02);
    Ok(())
}

fn criterion_3(c: &mut Checks, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_root: f64 = 0.0;
    for _ in 0..100 {
        let beta = rng.random_range(0.02..1.0);
        let big_r = rng.random_range(1.05..3.0);
        let big_l = rng.random_range(1.1..50.0);
        let r = solve_r1(beta, big_r, big_l)?;
        let g = oracles::solve_r1_grid(beta, big_r, big_l);
        worst_root = worst_root.max((r - g).abs() / g);
    }
    c.below("solve_r1 worst relative gap", worst_root, 1e-9);

    let instances: Vec<(f64, DriftParams)> = (0..100)
        .map(|_| -> Result<(f64, DriftParams)> {
            let bt = rng.random_range(0.05..0.9);
            let lambda = rng.random_range(0.3..0.95);
            let k = rng.random_range(1.2..6.0);
            Ok((bt, DriftParams::new(bt, bt, lambda, k)?))
        })
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = instances
        .par_iter()
        .map(|(beta, dp)| -> Result<f64> {
            let geo = geometry(dp)?;
            let (_, r1) = argmax_r1(*beta, &geo)?;
            let (_, g1) = oracles::argmax_r1_grid(*beta, &geo);
            Ok((r1 - g1).abs() / g1)
        })
        .collect::<Result<_>>()?;
    c.below("argmax R1 worst relative gap", gaps.iter().cloned().fold(0.0, f64::max), 1e-6);
    Ok(())
}

fn stationary_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn criterion_4(c: &mut Checks, seed: u64) -> Result<()> {
    let (dp, inp) = table_inputs()?;
    let mut rng = stream_rng(seed, 0);
    let mut x = stationary_normal(&mut rng);
    let n = 1_000_000;
    let mut sum_v = 0.0;
    for _ in 0..n {
        sum_v += 1.0 + x * x;
        x = cn_step(0.5, x, &mut rng);
    }
    let mean_v = sum_v / n as f64;
    let bound = pi_v_bound(&dp);
    c.abs("stationary mean of V", mean_v, 2.0, 0.02);
    c.abs("pi V bound", bound, 5.18, 0.01);
    c.below("mean of V below bound", mean_v, bound);

    let (reps, len) = (1000u64, 10_000usize);
    let sq: f64 = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, 1 + r);
            let mut x = stationary_normal(&mut rng);
            let mut s = 0.0;
            for _ in 0..len {
                s += x;
                x = cn_step(0.5, x, &mut rng);
            }
            (s / len as f64).powi(2)
        })
        .sum();
    let mse = sq / reps as f64;
    c.rel("one-walk MSE", mse, 3.0 / len as f64, 0.10);
    c.below("MSE below bound", mse, mse_bound(&inp, len as u128, Start::Stationary)?);
    Ok(())
}

fn criterion_5(c: &mut Checks, seed: u64) -> Result<()> {
    let k = ContractingNormals::new(0.5, 1.6226)?;
    let mut rng = stream_rng(seed, 0);
    let x0 = stationary_normal(&mut rng);
    let trace = split_run_m1(&k, x0, 1_000_000, &mut rng)?;
    let bm = batch_means_var(&trace.states, 0.5)?;
    let rs = regen_estimates(&tours(&trace, |x| *x)?)?.per_step_variance();
    c.abs("batch means", bm, 3.0, 0.3);
    c.abs("regenerative xi^2 N_bar", rs, 3.0, 0.45);
    c.below("relative disagreement", (bm - rs).abs() / rs, 0.15);
    Ok(())
}

fn criterion_6(c: &mut Checks, seed: u64) -> Result<()> {
    let k = ContractingNormals::new(0.5, 1.6226)?;
    let cfg = FixedWidthConfig::new(0.05, 0.1, FixedWidthMethod::BatchMeans);
    let runs: Vec<(bool, bool)> = (0..200u64)
        .into_par_iter()
        .map(|r| -> Result<(bool, bool)> {
            let mut rng = stream_rng(seed, r);
            let x0 = stationary_normal(&mut rng);
            let res = fixed_width_batch_means(&k, x0, |x| *x, &cfg, &mut rng)?;
            Ok((res.interval.0 <= 0.0 && 0.0 <= res.interval.1, res.stopped))
        })
        .collect::<Result<_>>()?;
    let cover = runs.iter().filter(|r| r.0).count() as f64 / runs.len() as f64;
    let stopped = runs.iter().filter(|r| r.1).count() as f64;
    c.at_least("coverage", cover, 0.86);
    c.push("runs stopped by the rule", stopped, "200".into(), stopped == 200.0);
    Ok(())
}

fn criterion_7(c: &mut Checks, seed: u64) -> Result<()> {
    let k = ContractingNormals::new(0.5, 1.6226)?;
    let n = 200_000;
    let mut rng = stream_rng(seed, 0);
    let x0 = stationary_normal(&mut rng);
    let trace = split_run_m1(&k, x0, n, &mut rng)?;
    let target = k.beta_tilde() * k.pi_c();
    let ind: Vec<f64> = trace.bells.iter().map(|&b| b as u8 as f64).collect();
    let sd = (batch_means_var(&ind, 0.5)? / n as f64).sqrt();
    let freq = trace.bell_frequency();
    c.push("bell frequency", freq, format!("{target} +/- 3 x {sd:.2e}"), (freq - target).abs() <= 3.0 * sd);

    let mut rng = stream_rng(seed, 1);
    let mut x = stationary_normal(&mut rng);
    let mut raw = Vec::with_capacity(n / 10);
    for i in 0..n {
        if i % 10 == 0 {
            raw.push(x);
        }
        x = cn_step(0.5, x, &mut rng);
    }
    let split: Vec<f64> = trace.states.iter().step_by(10).copied().collect();
    let (_, p) = ks_two_sample(&split, &raw);
    c.at_least("KS p-value, split vs raw", p, 0.01);
    let sq: Vec<f64> = split.iter().map(|x| x * x).collect();
    let raw_sq: Vec<f64> = raw.iter().map(|x| x * x).collect();
    let (_, p2) = ks_two_sample(&sq, &raw_sq);
    c.at_least("KS p-value on X^2", p2, 0.01);
    Ok(())
}

fn criterion_8(c: &mut Checks, seed: u64) -> Result<()> {
    let mut rng = stream_rng(seed, 0);
    let probe = tour_dependence_probe(100_000, &mut rng)?;
    let row_b = probe.rows.iter().position(|r| r == "b");
    let col_d = probe.cols.iter().position(|r| r == "d");
    if let (Some(b), Some(d)) = (row_b, col_d) {
        let cond = probe.exact_conditional[b][d];
        let marg = probe.exact_marginal[d];
        c.push("exact P(d | b) - P(d)", cond - marg, "!= 0".into(), (cond - marg).abs() > 1e-9);
    } else {
        c.push("states b and d observed", 0.0, "both".into(), false);
    }
    c.below("five-state chi-square p-value", probe.p_value, 1e-3);
    let mut rng = stream_rng(seed, 1);
    let control = two_state_control_probe(100_000, &mut rng)?;
    c.at_least("m = 1 control p-value", control.p_value, 0.01);
    Ok(())
}

const NINE_F: [f64; 5] = [1.0, -2.0, 0.5, 3.0, 0.0];

fn criterion_9(c: &mut Checks, seed: u64) -> Result<()> {
    let chain = five_state();
    let (m, eps, nu, cset) = five_state_split();
    let mut rng = stream_rng(seed, 0);
    let trace = split_run_finite(&chain, m, eps, &nu, &cset, 0, 1_000_000 / m as usize, &mut rng)?;
    let blocks = tours(&trace, |&s| NINE_F[s])?;
    let pi = chain.stationary()?;
    let pi_c: f64 = (0..5).filter(|&i| cset[i]).map(|i| pi[i]).sum();
    let est = regen_sigma2(&blocks, eps, pi_c, m)?;
    let exact = chain.asymptotic_variance(&NINE_F)?;
    c.rel("plug-in sigma^2", est, exact, 0.05);
    Ok(())
}

fn criterion_10(c: &mut Checks, seed: u64) -> Result<()> {
    let eps = 0.1;
    let n = 100;
    let freq = state_one_frequencies(|rng| policy_inhomogeneous(0.5, eps, n, rng).expect("valid"), 0, n, 100_000, seed);
    c.below("inhomogeneous TV to uniform at n = 100", tv_to_uniform(freq[n]), 0.01);

    let balance = trap_induced_chain(eps)?.stationary()?[1];
    c.abs("balance-equation oracle", balance, trap_stationary_one(eps), 1e-12);
    let mut rng = stream_rng(seed, u64::MAX);
    let path = run_adaptive(&policy_trap(eps)?, 0, 10_000_000, &mut rng);
    let ones = path.iter().filter(|&&x| x == 1).count() as f64 / path.len() as f64;
    c.abs("trap long-run frequency of 1", ones, balance, 0.01);
    Ok(())
}

fn criterion_11(c: &mut Checks, seed: u64) -> Result<()> {
    let (data, hyper) = synthetic_balanced();
    let mut set = HremPlanSettings::new(HremTarget::Mu, 0.1, 0.1);
    set.lambda_r = Some(SYNTHETIC_BLOCK_LAMBDA_R);
    set.phi = Some(BlockPhi::Balanced { phi: SYNTHETIC_BLOCK_PHI });
    let block = hrem_plan(&data, &hyper, &set)?;
    let held = block.checks.iter().filter(|k| k.holds).count();
    c.push("block preconditions", held as f64, format!("{}", block.checks.len()), held == block.checks.len());
    let bt = block.rosenthal.beta_tilde_r.unwrap_or(f64::NAN);
    c.push("block beta_tilde_R", bt, "in (0, 1)".into(), bt > 0.0 && bt < 1.0);
    let d_r = block.rosenthal.d_r.unwrap_or(f64::NAN);
    let (p1, p2) = block.phi.map_or(Ok((f64::NAN, f64::NAN)), |p| p.weights(&data))?;
    let closed = block_minorization(d_r, p1, p2, &hyper, &data)?;
    let quad = oracles::block_minorization_quadrature(d_r, p1, p2, &hyper, &data);
    c.below("block constant vs quadrature (relative)", (closed / quad - 1.0).abs(), 1e-6);
    c.push("finite plan", block.plan.n as f64, "> 0".into(), block.plan.n > 0);

    let mut fset = HremPlanSettings::new(HremTarget::LambdaE, 0.1, 0.1);
    fset.c3 = Some(1.0);
    let scan = hrem_minorization_scan(&data, &hyper, &fset)?;
    let held = scan.checks.iter().filter(|k| k.holds).count();
    c.push("fixed-scan preconditions", held as f64, format!("{}", scan.checks.len()), held == scan.checks.len());
    let lb = scan.ln_beta_tilde_r;
    c.push("fixed-scan ln beta_tilde_R", lb, "finite, < 0".into(), lb.is_finite() && lb < 0.0);
    let c3 = scan.c3.unwrap_or(1.0);
    let closed = gibbs_minorization_terms(scan.d_r, c3, &data, &hyper)?.ln_beta;
    let quad = oracles::gibbs_ln_minorization_quadrature(scan.d_r, c3, &data, &hyper);
    c.below("fixed-scan constant vs quadrature (relative)", (closed - quad).abs(), 1e-6);

    let sweeps = 100_000;
    let [a, b] = [0u64, 1].map(|stream| {
        let mut rng = stream_rng(seed, stream);
        let mut s = HremState::at_data(&data);
        let mut out = [Vec::with_capacity(sweeps), Vec::with_capacity(sweeps), Vec::with_capacity(sweeps)];
        for _ in 0..sweeps {
            s = if stream == 0 {
                block_gibbs_step(&s, &data, &hyper, &mut rng)
            } else {
                fixed_scan_step(&s, &data, &hyper, &mut rng)
            }?;
            out[0].push(s.mu);
            out[1].push(s.lambda_theta);
            out[2].push(s.lambda_e);
        }
        Ok::<_, crate::error::Error>(out)
    });
    let (a, b) = (a?, b?);
    for (i, name) in ["mu", "lambda_theta", "lambda_e"].iter().enumerate() {
        let (ma, sa) = mean_and_se(&a[i])?;
        let (mb, sb) = mean_and_se(&b[i])?;
        let se = (sa * sa + sb * sb).sqrt();
        c.push(
            &format!("sampler agreement on {name} (z)"),
            (ma - mb) / se,
            "|z| <= 3".into(),
            (ma - mb).abs() <= 3.0 * se,
        );
    }
    Ok(())
}

fn mean_and_se(x: &[f64]) -> Result<(f64, f64)> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    Ok((mean, (batch_means_var(x, 0.5)? / x.len() as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_criteria_pass() {
        let opts = VerifyOptions { seed: 1, quick: true };
        for id in [1, 2] {
            let r = run_criterion(id, &opts);
            assert!(r.error.is_none(), "{r:?}");
        }
        assert!(run_criterion(2, &opts).pass);
    }

    #[test]
    fn unknown_criterion_fails() {
        let r = run_criterion(99, &VerifyOptions { seed: 1, quick: false });
        assert!(!r.pass && r.error.is_some());
    }
}
