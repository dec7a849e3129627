//! Hierarchical random effects model: data ingestion and the two Gibbs
//! samplers (fixed-scan and block).

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prior hyperparameters: `mu ~ N(m0, 1/s0)`, `lambda_theta ~ Gamma(a1, b1)`,
/// `lambda_e ~ Gamma(a2, b2)` (rate parametrisation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HremHyper {
    pub m0: f64,
    pub s0: f64,
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl HremHyper {
    pub fn validate(&self) -> Result<()> {
        if !self.m0.is_finite() {
            return Err(Error::validation("m0 must be finite"));
        }
        for (name, v) in [("s0", self.s0), ("a1", self.a1), ("b1", self.b1), ("a2", self.a2), ("b2", self.b2)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(format!("hyperparameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Grouped observations with the summary statistics the samplers and
/// bounds use.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HremData {
    pub group_ids: Vec<String>,
    pub groups: Vec<Vec<f64>>,
    pub m: Vec<usize>,
    pub ybar_i: Vec<f64>,
    /// Total number of observations.
    pub big_m: usize,
    /// Within-group sum of squares.
    pub sse: f64,
    /// `sum_i (ybar_i - ybar)^2`.
    pub s2: f64,
    /// Unweighted mean of the group means.
    pub ybar: f64,
}

impl HremData {
    pub fn from_groups(group_ids: Vec<String>, groups: Vec<Vec<f64>>) -> Result<Self> {
        let k = groups.len();
        if k < 3 {
            return Err(Error::validation(format!("need at least K = 3 groups, got {k}")));
        }
        for (id, g) in group_ids.iter().zip(&groups) {
            if g.len() < 2 {
                return Err(Error::validation(format!(
                    "every group needs m_i >= 2 observations; group {id} has {}",
                    g.len()
                )));
            }
            if g.iter().any(|y| !y.is_finite()) {
                return Err(Error::validation(format!("group {id} has a non-finite observation")));
            }
        }
        let m: Vec<usize> = groups.iter().map(Vec::len).collect();
        let ybar_i: Vec<f64> = groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
        let sse = groups
            .iter()
            .zip(&ybar_i)
            .map(|(g, yb)| g.iter().map(|y| (y - yb) * (y - yb)).sum::<f64>())
            .sum();
        let ybar = ybar_i.iter().sum::<f64>() / k as f64;
        let s2 = ybar_i.iter().map(|y| (y - ybar) * (y - ybar)).sum();
        Ok(HremData { group_ids, big_m: m.iter().sum(), groups, m, ybar_i, sse, s2, ybar })
    }

    /// Groups are ordered by first appearance and need not be contiguous.
    pub fn from_records<S: AsRef<str>>(records: &[(S, f64)]) -> Result<Self> {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut ids = Vec::new();
        let mut groups: Vec<Vec<f64>> = Vec::new();
        for (g, y) in records {
            let g = g.as_ref();
            let i = *index.entry(g.to_string()).or_insert_with(|| {
                ids.push(g.to_string());
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[i].push(*y);
        }
        Self::from_groups(ids, groups)
    }

    /// CSV with header `group,y`.
    pub fn from_csv_reader<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers().map_err(|e| Error::validation(format!("line 1: {e}")))?.clone();
        if headers.len() != 2 || &headers[0] != "group" || &headers[1] != "y" {
            return Err(Error::validation(format!(
                "line 1: expected header `group,y`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut records = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::validation(format!("line {line}: {e}")))?;
            if row.len() != 2 {
                return Err(Error::validation(format!("line {line}: expected 2 fields, found {}", row.len())));
            }
            let y: f64 = row[1]
                .parse()
                .map_err(|_| Error::validation(format!("line {line}: cannot parse y value `{}`", &row[1])))?;
            if !y.is_finite() {
                return Err(Error::validation(format!("line {line}: y must be finite")));
            }
            records.push((row[0].to_string(), y));
        }
        Self::from_records(&records)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    /// Length of the convex hull of `{ybar_1, .., ybar_K, m0}`.
    pub fn delta(&self, m0: f64) -> f64 {
        let lo = self.ybar_i.iter().copied().fold(m0, f64::min);
        let hi = self.ybar_i.iter().copied().fold(m0, f64::max);
        hi - lo
    }

    /// `Some(m)` when every group has `m` observations.
    pub fn balanced(&self) -> Option<usize> {
        let m0 = self.m[0];
        self.m.iter().all(|&m| m == m0).then_some(m0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HremState {
    pub theta: Vec<f64>,
    pub mu: f64,
    pub lambda_theta: f64,
    pub lambda_e: f64,
}

impl HremState {
    /// `theta_i = ybar_i`, `mu = ybar`, both precisions 1.
    pub fn at_data(data: &HremData) -> Self {
        HremState { theta: data.ybar_i.clone(), mu: data.ybar, lambda_theta: 1.0, lambda_e: 1.0 }
    }

    pub fn theta_bar(&self) -> f64 {
        self.theta.iter().sum::<f64>() / self.theta.len() as f64
    }
}

/// `sum_i (theta_i - mu)^2`.
pub fn nu1(theta: &[f64], mu: f64) -> f64 {
    theta.iter().map(|t| (t - mu) * (t - mu)).sum()
}

/// `sum_i (theta_i - ybar_i)^2`.
pub fn nu2(theta: &[f64], data: &HremData) -> f64 {
    theta.iter().zip(&data.ybar_i).map(|(t, y)| (t - y) * (t - y)).sum()
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::numeric(format!("Gamma({shape}, rate {rate}): {e}")))?;
    Ok(g.sample(rng))
}

fn normal_draw<R: Rng + ?Sized>(mean: f64, var: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + var.sqrt() * z
}

/// Precision draws from their full conditionals given `(theta, mu)`.
fn draw_lambdas<R: Rng + ?Sized>(
    theta: &[f64],
    mu: f64,
    data: &HremData,
    hyper: &HremHyper,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let k = data.k() as f64;
    let lt = gamma_draw(k / 2.0 + hyper.a1, nu1(theta, mu) / 2.0 + hyper.b1, rng)?;
    let le = gamma_draw(
        data.big_m as f64 / 2.0 + hyper.a2,
        (nu2(theta, data) + data.sse) / 2.0 + hyper.b2,
        rng,
    )?;
    Ok((lt, le))
}

fn check_state(state: &HremState, data: &HremData) -> Result<()> {
    if !(state.lambda_theta > 0.0 && state.lambda_e > 0.0) {
        return Err(Error::domain("precisions in the state must be positive"));
    }
    if state.theta.len() != data.k() {
        return Err(Error::domain(format!("state has {} thetas, data has {} groups", state.theta.len(), data.k())));
    }
    Ok(())
}

/// One sweep of the fixed-scan sampler: `mu`, then every `theta_i`, then
/// `(lambda_theta, lambda_e)`.
pub fn fixed_scan_step<R: Rng + ?Sized>(
    state: &HremState,
    data: &HremData,
    hyper: &HremHyper,
    rng: &mut R,
) -> Result<HremState> {
    check_state(state, data)?;
    let k = data.k() as f64;
    let (lt, le) = (state.lambda_theta, state.lambda_e);
    let prec_mu = hyper.s0 + k * lt;
    let mu = normal_draw((hyper.s0 * hyper.m0 + k * lt * state.theta_bar()) / prec_mu, 1.0 / prec_mu, rng);
    let theta: Vec<f64> = (0..data.k())
        .map(|i| {
            let mi = data.m[i] as f64;
            let p = lt + mi * le;
            normal_draw((lt * mu + mi * le * data.ybar_i[i]) / p, 1.0 / p, rng)
        })
        .collect();
    let (lambda_theta, lambda_e) = draw_lambdas(&theta, mu, data, hyper, rng)?;
    Ok(HremState { theta, mu, lambda_theta, lambda_e })
}

/// Mean and covariance of `xi = (theta_1, .., theta_K, mu)` given the
/// precisions.
pub fn block_conditional(data: &HremData, hyper: &HremHyper, lt: f64, le: f64) -> (DVector<f64>, DMatrix<f64>) {
    let k = data.k();
    let p: Vec<f64> = (0..k).map(|i| lt + data.m[i] as f64 * le).collect();
    let tau: f64 = (0..k).map(|i| data.m[i] as f64 * lt * le / p[i]).sum();
    let st = hyper.s0 + tau;
    let e_mu = ((0..k).map(|i| data.m[i] as f64 * lt * le * data.ybar_i[i] / p[i]).sum::<f64>()
        + hyper.m0 * hyper.s0)
        / st;
    let mut mean = DVector::zeros(k + 1);
    let mut cov = DMatrix::zeros(k + 1, k + 1);
    for i in 0..k {
        mean[i] = lt * e_mu / p[i] + data.m[i] as f64 * le * data.ybar_i[i] / p[i];
        for j in 0..k {
            let c = lt * lt / (p[i] * p[j] * st);
            cov[(i, j)] = if i == j { 1.0 / p[i] + c } else { c };
        }
        let c_mu = lt / (p[i] * st);
        cov[(i, k)] = c_mu;
        cov[(k, i)] = c_mu;
    }
    mean[k] = e_mu;
    cov[(k, k)] = 1.0 / st;
    (mean, cov)
}

/// Lower Cholesky factor, retrying once with a `1e-12` diagonal jitter.
pub(crate) fn cholesky_with_jitter(cov: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(ch) = cov.clone().cholesky() {
        return Some(ch.l());
    }
    let n = cov.nrows();
    let jittered = cov + DMatrix::identity(n, n) * 1e-12;
    jittered.cholesky().map(|c| c.l())
}

/// One step of the block sampler: `(lambda_theta, lambda_e)` from the
/// current `xi`, then `xi` jointly from its Gaussian conditional.
pub fn block_gibbs_step<R: Rng + ?Sized>(
    state: &HremState,
    data: &HremData,
    hyper: &HremHyper,
    rng: &mut R,
) -> Result<HremState> {
    check_state(state, data)?;
    let (lt, le) = draw_lambdas(&state.theta, state.mu, data, hyper, rng)?;
    let (mean, cov) = block_conditional(data, hyper, lt, le);
    let l = cholesky_with_jitter(&cov).ok_or_else(|| {
        Error::numeric(format!("xi covariance not positive definite at lambda_theta = {lt}, lambda_e = {le}"))
    })?;
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let xi = mean + l * z;
    let k = data.k();
    Ok(HremState { theta: xi.rows(0, k).iter().copied().collect(), mu: xi[k], lambda_theta: lt, lambda_e: le })
}

/// Balanced `K = 3`, `m_i = 2` data under a tight prior, for which the
/// block sampler's minorization constant is of order `0.1`. Use with
/// [`SYNTHETIC_BLOCK_LAMBDA_R`] and [`SYNTHETIC_BLOCK_PHI`].
pub fn synthetic_balanced() -> (HremData, HremHyper) {
    let (s, w) = (0.013, 0.31);
    let data = HremData::from_records(&[
        ("g1", -s - w),
        ("g1", -s + w),
        ("g2", -w),
        ("g2", w),
        ("g3", s - w),
        ("g3", s + w),
    ])
    .expect("preset records");
    let hyper = HremHyper { m0: 0.0, s0: 250.0, a1: 40.0, b1: 680.0, a2: 80.0, b2: 340.0 };
    (data, hyper)
}

pub const SYNTHETIC_BLOCK_LAMBDA_R: f64 = 0.16;
pub const SYNTHETIC_BLOCK_PHI: f64 = 0.64;

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic() -> (HremData, HremHyper) {
        let data = HremData::from_records(&[
            ("g1", 1.0),
            ("g1", 2.0),
            ("g2", 2.0),
            ("g2", 3.0),
            ("g3", 3.0),
            ("g3", 4.0),
        ])
        .unwrap();
        (data, HremHyper { m0: 2.5, s0: 1.0, a1: 2.0, b1: 1.0, a2: 2.0, b2: 1.0 })
    }

    #[test]
    fn ingestion_statistics() {
        let (d, _) = synthetic();
        assert_eq!(d.big_m, 6);
        assert_eq!(d.ybar_i, vec![1.5, 2.5, 3.5]);
        assert!((d.sse - 1.5).abs() < 1e-15);
        assert!((d.s2 - 2.0).abs() < 1e-15);
        assert_eq!(d.delta(2.5), 2.0);
        assert_eq!(d.delta(10.0), 8.5);
        assert_eq!(d.balanced(), Some(2));

        let c = HremData::from_records(&[("a", 5.0), ("b", 5.0), ("a", 5.0), ("c", 5.0), ("b", 5.0), ("c", 5.0)])
            .unwrap();
        assert_eq!((c.sse, c.s2), (0.0, 0.0));
        assert_eq!(c.group_ids, vec!["a", "b", "c"]);
    }

    #[test]
    fn ingestion_errors() {
        assert!(HremData::from_records(&[("a", 1.0), ("a", 2.0), ("b", 1.0), ("b", 2.0)]).is_err());
        let e = HremData::from_records(&[("a", 1.0), ("a", 2.0), ("b", 1.0), ("b", 2.0), ("c", 1.0)]).unwrap_err();
        assert!(e.to_string().contains("m_i >= 2"));
        let csv = "group,y\na,1\na,2\nb,x\n";
        let e = HremData::from_csv_reader(csv.as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 4"), "{e}");
        let e = HremData::from_csv_reader("grp,y\na,1\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 1"));
    }

    // The conditional of xi given lambda has precision
    // Q_ii = lt + m_i le, Q_i,mu = -lt, Q_mu,mu = s0 + K lt; Sigma must invert it
    // and the mean must solve Q mean = (m_i le ybar_i, s0 m0).
    #[test]
    fn block_covariance_inverts_the_precision() {
        let (d, h) = synthetic();
        let d = HremData::from_groups(
            d.group_ids.clone(),
            vec![d.groups[0].clone(), vec![2.0, 3.0, 7.0], d.groups[2].clone()],
        )
        .unwrap();
        for &(lt, le) in &[(0.3, 2.0), (5.0, 0.1), (1.0, 1.0)] {
            let (mean, cov) = block_conditional(&d, &h, lt, le);
            let k = d.k();
            let mut q = DMatrix::zeros(k + 1, k + 1);
            let mut rhs = DVector::zeros(k + 1);
            for i in 0..k {
                q[(i, i)] = lt + d.m[i] as f64 * le;
                q[(i, k)] = -lt;
                q[(k, i)] = -lt;
                rhs[i] = d.m[i] as f64 * le * d.ybar_i[i];
            }
            q[(k, k)] = h.s0 + k as f64 * lt;
            rhs[k] = h.s0 * h.m0;
            let prod = &cov * &q;
            assert!((prod - DMatrix::identity(k + 1, k + 1)).abs().max() < 1e-12);
            assert!((&q * &mean - rhs).abs().max() < 1e-12);
        }
    }

    #[test]
    fn balanced_covariance_is_exchangeable() {
        let (d, h) = synthetic();
        let (_, cov) = block_conditional(&d, &h, 0.7, 1.9);
        assert!((cov[(0, 0)] - cov[(2, 2)]).abs() < 1e-15);
        assert!((cov[(0, 1)] - cov[(1, 2)]).abs() < 1e-15);
        assert!((cov[(3, 3)] - 1.0 / (h.s0 + cov_tau(&d, 0.7, 1.9))).abs() < 1e-15);
    }

    fn cov_tau(d: &HremData, lt: f64, le: f64) -> f64 {
        d.m.iter().map(|&m| m as f64 * lt * le / (lt + m as f64 * le)).sum()
    }
}
