use serde::{Deserialize, Serialize};

use super::TourBlocks;
use crate::error::{Error, Result};

/// Estimation scheme for `E_pi f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum Scheme {
    /// Average of `f(X_t), ..., f(X_{t+n-1})`.
    OneWalk { t: usize, n: usize },
    /// Average of `f(X_{is})` for `i = t, ..., t+n-1`.
    Spaced { t: usize, n: usize, s: usize },
    /// Average of `f(X_t)` over the first `n` independent runs.
    MultiRun { t: usize, n: usize },
    /// Median of `m` one-walk averages from independent runs.
    Median { t: usize, n: usize, m: usize },
}

/// Values `f(X_i)` from one walk, or from independent runs.
#[derive(Debug, Clone, Copy)]
pub enum Samples<'a> {
    Walk(&'a [f64]),
    Runs(&'a [Vec<f64>]),
}

pub fn estimate(samples: Samples<'_>, scheme: Scheme) -> Result<f64> {
    match (samples, scheme) {
        (Samples::Walk(x), Scheme::OneWalk { t, n }) => one_walk(x, t, n),
        (Samples::Walk(x), Scheme::Spaced { t, n, s }) => spaced(x, t, n, s),
        (Samples::Runs(r), Scheme::MultiRun { t, n }) => multi_run(r, t, n),
        (Samples::Runs(r), Scheme::Median { t, n, m }) => median_of_averages(r, t, n, m),
        (Samples::Runs(r), Scheme::OneWalk { t, n }) if r.len() == 1 => one_walk(&r[0], t, n),
        _ => Err(Error::validation("scheme does not match the sample layout")),
    }
}

pub fn one_walk(x: &[f64], t: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::validation("n must be positive"));
    }
    let end = t.checked_add(n).filter(|&e| e <= x.len());
    let end = end.ok_or_else(|| Error::insufficient(format!("need {} samples, have {}", t + n, x.len())))?;
    Ok(x[t..end].iter().sum::<f64>() / n as f64)
}

pub fn spaced(x: &[f64], t: usize, n: usize, s: usize) -> Result<f64> {
    if n == 0 || s == 0 {
        return Err(Error::validation("n and s must be positive"));
    }
    let last = (t + n - 1) * s;
    if last >= x.len() {
        return Err(Error::insufficient(format!("need {} samples, have {}", last + 1, x.len())));
    }
    Ok((t..t + n).map(|i| x[i * s]).sum::<f64>() / n as f64)
}

pub fn multi_run(runs: &[Vec<f64>], t: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::validation("n must be positive"));
    }
    if runs.len() < n {
        return Err(Error::insufficient(format!("need {n} runs, have {}", runs.len())));
    }
    let mut acc = 0.0;
    for (k, r) in runs[..n].iter().enumerate() {
        let v = r.get(t).ok_or_else(|| Error::insufficient(format!("run {k} is shorter than t + 1 = {}", t + 1)))?;
        acc += v;
    }
    Ok(acc / n as f64)
}

pub fn median_of_averages(runs: &[Vec<f64>], t: usize, n: usize, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::validation("m must be positive"));
    }
    if runs.len() < m {
        return Err(Error::insufficient(format!("need {m} runs, have {}", runs.len())));
    }
    let mut avgs = runs[..m].iter().map(|r| one_walk(r, t, n)).collect::<Result<Vec<_>>>()?;
    avgs.sort_by(f64::total_cmp);
    Ok(if m % 2 == 1 { avgs[m / 2] } else { 0.5 * (avgs[m / 2 - 1] + avgs[m / 2]) })
}

/// Batch-means estimate of the asymptotic variance with `a_n` batches of
/// length `b_n = floor(n^theta_b)`. Trailing samples that do not fill a
/// batch are dropped.
pub fn batch_means_var(x: &[f64], theta_b: f64) -> Result<f64> {
    if !(theta_b > 0.0 && theta_b < 1.0) {
        return Err(Error::validation(format!("batch exponent must lie in (0, 1), got {theta_b}")));
    }
    let n = x.len() as f64;
    let b = n.powf(theta_b).floor() as usize;
    let a = n.powf(1.0 - theta_b).floor() as usize;
    if a < 2 || b == 0 {
        return Err(Error::insufficient(format!("{} samples give {a} batches", x.len())));
    }
    let a = a.min(x.len() / b);
    let means: Vec<f64> = x.chunks_exact(b).take(a).map(|c| c.iter().sum::<f64>() / b as f64).collect();
    let grand = means.iter().sum::<f64>() / a as f64;
    let ss: f64 = means.iter().map(|m| (m - grand).powi(2)).sum();
    Ok(b as f64 * ss / (a - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegenEstimates {
    pub i_hat: f64,
    /// Variance in the tour-count CLT, `sqrt(R) (I_hat - I) -> N(0, xi^2)`.
    pub xi2: f64,
    pub n_bar: f64,
    pub tours: usize,
}

impl RegenEstimates {
    /// `xi^2 N_bar`, comparable with a per-step asymptotic variance.
    pub fn per_step_variance(&self) -> f64 {
        self.xi2 * self.n_bar
    }
}

pub fn regen_estimates(b: &TourBlocks) -> Result<RegenEstimates> {
    let r = b.len();
    if r < 2 {
        return Err(Error::insufficient(format!("{r} tours, need at least 2")));
    }
    let total_n = b.total_length() as f64;
    let i_hat = b.s.iter().sum::<f64>() / total_n;
    let n_bar = total_n / r as f64;
    let ss: f64 = b.s.iter().zip(&b.n).map(|(&s, &n)| (s - i_hat * n as f64).powi(2)).sum();
    Ok(RegenEstimates { i_hat, xi2: ss / (r as f64 * n_bar * n_bar), n_bar, tours: r })
}

/// Plug-in version of the tour-based variance formula
/// `(eps pi(C) / m) { E s_0^2 + 2 E s_0 s_1 }` with `f` centred at the
/// ratio estimate.
pub fn regen_sigma2(b: &TourBlocks, epsilon: f64, pi_c: f64, m: u32) -> Result<f64> {
    let r = b.len();
    if r < 3 {
        return Err(Error::insufficient(format!("{r} tours, need at least 3")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) || !(pi_c > 0.0 && pi_c <= 1.0) || m == 0 {
        return Err(Error::validation("need epsilon, pi(C) in (0, 1] and m >= 1"));
    }
    let i_hat = b.s.iter().sum::<f64>() / b.total_length() as f64;
    let c: Vec<f64> = b.s.iter().zip(&b.n).map(|(&s, &n)| s - i_hat * n as f64).collect();
    let sq = c.iter().map(|v| v * v).sum::<f64>() / r as f64;
    let cross = c.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (r - 1) as f64;
    Ok(epsilon * pi_c / m as f64 * (sq + 2.0 * cross))
}

/// Sample lag-1 autocorrelation.
pub fn lag1_correlation(x: &[f64]) -> Result<f64> {
    if x.len() < 3 {
        return Err(Error::insufficient("need at least 3 values"));
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if var == 0.0 {
        return Err(Error::insufficient("constant series has no correlation"));
    }
    let cov: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    Ok(cov / var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::normals::cn_step;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use rand::Rng;

    #[test]
    fn constant_function_every_scheme() {
        let x = vec![2.5; 100];
        let runs = vec![x.clone(); 7];
        for sch in [
            Scheme::OneWalk { t: 10, n: 50 },
            Scheme::Spaced { t: 3, n: 10, s: 4 },
        ] {
            assert_eq!(estimate(Samples::Walk(&x), sch).unwrap(), 2.5);
        }
        for sch in [Scheme::MultiRun { t: 20, n: 7 }, Scheme::Median { t: 5, n: 30, m: 5 }] {
            assert_eq!(estimate(Samples::Runs(&runs), sch).unwrap(), 2.5);
        }
        assert_eq!(batch_means_var(&x, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn spacing_one_is_one_walk() {
        let x: Vec<f64> = (0..200).map(|i| (i as f64).sin()).collect();
        assert_eq!(spaced(&x, 13, 100, 1).unwrap(), one_walk(&x, 13, 100).unwrap());
    }

    #[test]
    fn scheme_errors() {
        let x = vec![1.0; 10];
        assert!(matches!(one_walk(&x, 5, 6), Err(Error::InsufficientData(_))));
        assert!(spaced(&x, 2, 3, 4).is_err());
        assert!(estimate(Samples::Walk(&x), Scheme::MultiRun { t: 0, n: 1 }).is_err());
        assert!(batch_means_var(&[1.0, 2.0, 3.0], 0.5).is_err());
    }

    #[test]
    fn median_picks_middle_average() {
        let runs: Vec<Vec<f64>> = [3.0, -1.0, 7.0].iter().map(|&v| vec![v; 4]).collect();
        assert_eq!(median_of_averages(&runs, 0, 4, 3).unwrap(), 3.0);
    }

    #[test]
    fn batch_means_iid_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x: Vec<f64> = (0..1_000_000).map(|_| rng.sample(StandardNormal)).collect();
        let v = batch_means_var(&x, 0.5).unwrap();
        assert!((v - 1.0).abs() < 0.1, "{v}");
    }

    #[test]
    fn batch_means_ar1() {
        let theta = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| {
                x = cn_step(theta, x, &mut rng);
                x
            })
            .collect();
        let v = batch_means_var(&xs, 0.5).unwrap();
        assert!((v - (1.0 + theta) / (1.0 - theta)).abs() < 0.3, "{v}");
    }

    #[test]
    fn regen_formulas_collapse_for_unit_tours() {
        let s = vec![1.0, 4.0, -2.0, 0.5, 3.0];
        let b = TourBlocks { s: s.clone(), n: vec![1; 5], m: 1 };
        let e = regen_estimates(&b).unwrap();
        let mean = s.iter().sum::<f64>() / 5.0;
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((e.i_hat - mean).abs() < 1e-15);
        assert!((e.xi2 - var).abs() < 1e-12);
        assert_eq!(e.n_bar, 1.0);
    }

    #[test]
    fn constant_f_has_zero_regen_variance() {
        let b = TourBlocks { s: vec![6.0, 2.0, 10.0, 4.0], n: vec![3, 1, 5, 2], m: 1 };
        assert_eq!(regen_estimates(&b).unwrap().xi2, 0.0);
        assert_eq!(regen_sigma2(&b, 0.5, 1.0, 1).unwrap(), 0.0);
        let zero = TourBlocks { s: vec![0.0; 4], n: vec![3, 1, 5, 2], m: 1 };
        assert_eq!(regen_sigma2(&zero, 0.5, 1.0, 1).unwrap(), 0.0);
        assert!(regen_sigma2(&TourBlocks { s: vec![1.0; 2], n: vec![1; 2], m: 1 }, 0.5, 1.0, 1).is_err());
    }

    #[test]
    fn lag1_of_alternating_series() {
        let x: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!((lag1_correlation(&x).unwrap() + 1.0).abs() < 1e-2);
    }
}
