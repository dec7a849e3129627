use rand::Rng;
use serde::{Deserialize, Serialize};

use super::retrospective_bell;
use crate::chains::{Kernel, SplitMinorization};
use crate::error::{Error, Result};
use crate::numeric::norm_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedWidthMethod {
    /// Batch means, checked after each step.
    BatchMeans,
    /// Regenerative, checked after each completed tour.
    Regenerative,
}

fn inverse_n(n: u64) -> f64 {
    1.0 / n as f64
}

#[derive(Debug, Clone, Copy)]
pub struct FixedWidthConfig {
    /// Desired half-width.
    pub eps: f64,
    /// Nominal non-coverage.
    pub delta: f64,
    pub method: FixedWidthMethod,
    /// Penalty added to the half-width estimate; must be positive,
    /// decreasing and `o(n^{-1/2})`.
    pub p: fn(u64) -> f64,
    pub theta_b: f64,
    /// Earliest step (batch means) or tour count (regenerative) at which
    /// the rule is checked.
    pub min_count: u64,
    /// Simulation budget in steps.
    pub max_steps: u64,
}

impl FixedWidthConfig {
    pub fn new(eps: f64, delta: f64, method: FixedWidthMethod) -> Self {
        FixedWidthConfig {
            eps,
            delta,
            method,
            p: inverse_n,
            theta_b: 0.5,
            min_count: match method {
                FixedWidthMethod::BatchMeans => 16,
                FixedWidthMethod::Regenerative => 2,
            },
            max_steps: 10_000_000,
        }
    }

    fn validate(&self) -> Result<f64> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::validation(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::validation(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        let mut prev = f64::INFINITY;
        let mut prev_scaled = f64::INFINITY;
        for k in 0..=40 {
            let n = 1u64 << k;
            let v = (self.p)(n);
            let scaled = v * (n as f64).sqrt();
            if !(v > 0.0) || !(v < prev) || scaled > prev_scaled {
                return Err(Error::validation(format!("p(n) must be positive, decreasing and o(n^-1/2); fails at n = {n}")));
            }
            prev = v;
            prev_scaled = scaled;
        }
        Ok(norm_quantile(1.0 - self.delta / 2.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedWidthResult {
    pub method: FixedWidthMethod,
    pub steps: u64,
    pub tours: Option<u64>,
    pub estimate: f64,
    /// Batch-means `sigma^2` or regenerative `xi^2` at the stopping time.
    pub variance: f64,
    pub interval: (f64, f64),
    /// `q sigma_hat / sqrt(n) + p(n)` at the stopping time.
    pub criterion: f64,
    /// `false` when the budget ran out before the rule was met; the
    /// interval then does not carry the nominal guarantee.
    pub stopped: bool,
}

/// Runs the chain from `x0` until the sequential fixed-width rule is met
/// or the budget is exhausted.
pub fn fixed_width_run<K, F, R>(kernel: &K, x0: K::State, f: F, cfg: &FixedWidthConfig, rng: &mut R) -> Result<FixedWidthResult>
where
    K: SplitMinorization,
    F: Fn(&K::State) -> f64,
    R: Rng + ?Sized,
{
    match cfg.method {
        FixedWidthMethod::BatchMeans => fixed_width_batch_means(kernel, x0, f, cfg, rng),
        FixedWidthMethod::Regenerative => fixed_width_regenerative(kernel, x0, f, cfg, rng),
    }
}

/// Batch-means rule; needs no minorization.
pub fn fixed_width_batch_means<K, F, R>(
    kernel: &K,
    x0: K::State,
    f: F,
    cfg: &FixedWidthConfig,
    rng: &mut R,
) -> Result<FixedWidthResult>
where
    K: Kernel,
    F: Fn(&K::State) -> f64,
    R: Rng + ?Sized,
{
    let q = cfg.validate()?;
    if !(cfg.theta_b > 0.0 && cfg.theta_b < 1.0) {
        return Err(Error::validation("batch exponent must lie in (0, 1)"));
    }
    let min_n = cfg.min_count.max(4);
    let mut cum = vec![0.0];
    let mut x = x0;
    let mut next_check = min_n;
    let mut last = None;
    for n in 1..=cfg.max_steps {
        let v = f(&x);
        cum.push(cum[cum.len() - 1] + v);
        x = kernel.step(&x, rng);
        if n < next_check {
            continue;
        }
        next_check = n + (n / 10_000).max(1);
        let Some(var) = bm_from_prefix(&cum, cfg.theta_b) else { continue };
        let crit = q * (var / n as f64).sqrt() + (cfg.p)(n);
        let mean = cum[n as usize] / n as f64;
        last = Some((n, mean, var, crit));
        if crit <= cfg.eps {
            return Ok(report(cfg, n, None, mean, var, crit, true));
        }
    }
    let (n, mean, var, crit) =
        last.ok_or_else(|| Error::insufficient(format!("budget of {} steps is below the minimum", cfg.max_steps)))?;
    Ok(report(cfg, n, None, mean, var, crit, false))
}

fn bm_from_prefix(cum: &[f64], theta_b: f64) -> Option<f64> {
    let n = cum.len() - 1;
    let b = (n as f64).powf(theta_b).floor() as usize;
    let a = ((n as f64).powf(1.0 - theta_b).floor() as usize).min(n / b.max(1));
    if a < 2 || b == 0 {
        return None;
    }
    let means: Vec<f64> = (0..a).map(|j| (cum[(j + 1) * b] - cum[j * b]) / b as f64).collect();
    let grand = cum[a * b] / (a * b) as f64;
    let ss: f64 = means.iter().map(|m| (m - grand).powi(2)).sum();
    Some(b as f64 * ss / (a - 1) as f64)
}

fn fixed_width_regenerative<K, F, R>(
    kernel: &K,
    x0: K::State,
    f: F,
    cfg: &FixedWidthConfig,
    rng: &mut R,
) -> Result<FixedWidthResult>
where
    K: SplitMinorization,
    F: Fn(&K::State) -> f64,
    R: Rng + ?Sized,
{
    let q = cfg.validate()?;
    let min_r = cfg.min_count.max(2);
    let mut x = x0;
    let mut in_tour = false;
    let (mut cur_s, mut cur_n) = (0.0, 0u64);
    let (mut r, mut ss, mut sn, mut s2, mut sn2, mut snn) = (0u64, 0.0, 0u64, 0.0, 0.0, 0.0);
    let mut last = None;
    for step in 1..=cfg.max_steps {
        let y = kernel.step(&x, rng);
        let bell = retrospective_bell(kernel, &x, &y, rng)?;
        if in_tour {
            cur_s += f(&x);
            cur_n += 1;
        }
        x = y;
        if !bell {
            continue;
        }
        if in_tour {
            r += 1;
            ss += cur_s;
            sn += cur_n;
            s2 += cur_s * cur_s;
            snn += cur_s * cur_n as f64;
            sn2 += (cur_n * cur_n) as f64;
        }
        in_tour = true;
        cur_s = 0.0;
        cur_n = 0;
        if r >= min_r {
            let i_hat = ss / sn as f64;
            let n_bar = sn as f64 / r as f64;
            let dev = (s2 - 2.0 * i_hat * snn + i_hat * i_hat * sn2).max(0.0);
            let xi2 = dev / (r as f64 * n_bar * n_bar);
            let crit = q * (xi2 / r as f64).sqrt() + (cfg.p)(r);
            last = Some((step, r, i_hat, xi2, crit));
            if crit <= cfg.eps {
                return Ok(report(cfg, step, Some(r), i_hat, xi2, crit, true));
            }
        }
    }
    let (step, r, i_hat, xi2, crit) = last.ok_or_else(|| {
        Error::insufficient(format!("fewer than {min_r} tours completed within {} steps", cfg.max_steps))
    })?;
    Ok(report(cfg, step, Some(r), i_hat, xi2, crit, false))
}

fn report(
    cfg: &FixedWidthConfig,
    steps: u64,
    tours: Option<u64>,
    estimate: f64,
    variance: f64,
    criterion: f64,
    stopped: bool,
) -> FixedWidthResult {
    if !stopped {
        log::warn!("fixed-width run hit its budget of {} steps before the stopping rule held", cfg.max_steps);
    }
    FixedWidthResult {
        method: cfg.method,
        steps,
        tours,
        estimate,
        variance,
        interval: (estimate - cfg.eps, estimate + cfg.eps),
        criterion,
        stopped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::ContractingNormals;
    use crate::regen::batch_means_var;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn huge_eps_stops_at_minimum() {
        let k = ContractingNormals::new(0.5, 1.6226).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let cfg = FixedWidthConfig::new(1e6, 0.1, FixedWidthMethod::BatchMeans);
        let r = fixed_width_run(&k, 0.0, |x| *x, &cfg, &mut rng).unwrap();
        assert!(r.stopped);
        assert_eq!(r.steps, 16);
    }

    #[test]
    fn budget_cap_is_reported() {
        let k = ContractingNormals::new(0.5, 1.6226).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let mut cfg = FixedWidthConfig::new(1e-4, 0.1, FixedWidthMethod::Regenerative);
        cfg.max_steps = 5_000;
        let r = fixed_width_run(&k, 0.0, |x| *x, &cfg, &mut rng).unwrap();
        assert!(!r.stopped);
        assert!(r.criterion > cfg.eps);
    }

    #[test]
    fn penalty_validation() {
        let mut cfg = FixedWidthConfig::new(0.1, 0.1, FixedWidthMethod::BatchMeans);
        assert!(cfg.validate().is_ok());
        cfg.p = |n| 1.0 / (n as f64).sqrt().sqrt();
        assert!(cfg.validate().is_err());
        cfg.p = |_| 0.01;
        assert!(cfg.validate().is_err());
        assert!((inverse_n(4) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn prefix_batch_means_agree_with_direct() {
        let x: Vec<f64> = (0..10_007).map(|i| ((i * 7919) % 101) as f64).collect();
        let mut cum = vec![0.0];
        for v in &x {
            cum.push(cum[cum.len() - 1] + v);
        }
        let a = bm_from_prefix(&cum, 0.5).unwrap();
        let b = batch_means_var(&x, 0.5).unwrap();
        assert!((a - b).abs() < 1e-9 * b, "{a} {b}");
    }
}
