use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::{Kernel, SplitMinorization};
use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-9;

/// A finite-state chain with labelled states and an exact sampler.
#[derive(Debug, Clone)]
pub struct FiniteChain {
    p: DMatrix<f64>,
    labels: Vec<String>,
    rows: Vec<WeightedIndex<f64>>,
    /// One-step minorization `(epsilon, nu, C)` for the m = 1 split.
    minor: Option<(f64, Vec<f64>, Vec<bool>)>,
}

impl FiniteChain {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::validation("transition matrix is empty"));
        }
        if labels.len() != n {
            return Err(Error::validation(format!("{} labels for {n} states", labels.len())));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::validation(format!("row {i} has {} entries, expected {n}", r.len())));
            }
            if r.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::validation(format!("row {i} has a negative or non-finite entry")));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::validation(format!("row {i} sums to {s}, not 1")));
            }
        }
        let p = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        let rows = rows
            .iter()
            .map(|r| WeightedIndex::new(r).map_err(|e| Error::validation(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(FiniteChain { p, labels, rows, minor: None })
    }

    /// Numbered labels `0, 1, ...`.
    pub fn unlabelled(rows: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(rows, labels)
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.p[(i, j)]
    }

    pub fn power(&self, m: u32) -> DMatrix<f64> {
        let n = self.n_states();
        let mut out = DMatrix::identity(n, n);
        for _ in 0..m {
            out = &out * &self.p;
        }
        out
    }

    /// Checks `P^m(x, .) >= epsilon 1_C(x) nu(.)` entrywise.
    pub fn check_minorization(&self, m: u32, epsilon: f64, nu: &[f64], small_set: &[bool]) -> Result<()> {
        let n = self.n_states();
        if m == 0 {
            return Err(Error::validation("skeleton step m must be at least 1"));
        }
        if nu.len() != n || small_set.len() != n {
            return Err(Error::validation("nu and C must have one entry per state"));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::validation(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        if nu.iter().any(|&v| v < 0.0) || (nu.iter().sum::<f64>() - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::validation("nu must be a probability vector"));
        }
        let pm = self.power(m);
        for x in (0..n).filter(|&x| small_set[x]) {
            for y in 0..n {
                if pm[(x, y)] < epsilon * nu[y] - 1e-12 {
                    return Err(Error::validation(format!(
                        "minorization fails: P^{m}({}, {}) = {} < epsilon nu = {}",
                        self.labels[x],
                        self.labels[y],
                        pm[(x, y)],
                        epsilon * nu[y]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Attaches a one-step minorization so the chain can be split with the
    /// retrospective sampler.
    pub fn with_minorization(mut self, epsilon: f64, nu: Vec<f64>, small_set: Vec<bool>) -> Result<Self> {
        self.check_minorization(1, epsilon, &nu, &small_set)?;
        self.minor = Some((epsilon, nu, small_set));
        Ok(self)
    }

    /// Stationary distribution from `pi (P - I) = 0`, `sum pi = 1`.
    pub fn stationary(&self) -> Result<DVector<f64>> {
        let n = self.n_states();
        let mut a = self.p.transpose() - DMatrix::identity(n, n);
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let pi = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::numeric("stationary system is singular (chain not irreducible?)"))?;
        if pi.iter().any(|&v| v < -1e-12) {
            return Err(Error::numeric("stationary solution has negative mass"));
        }
        Ok(pi)
    }

    /// Asymptotic variance of `f` from the fundamental matrix
    /// `Z = (I - P + 1 pi^T)^{-1}`:
    /// `sigma^2 = sum_i pi_i fbar_i (2 (Z fbar)_i - fbar_i)`.
    pub fn asymptotic_variance(&self, f: &[f64]) -> Result<f64> {
        let n = self.n_states();
        if f.len() != n {
            return Err(Error::validation("f must have one value per state"));
        }
        let pi = self.stationary()?;
        let mean: f64 = (0..n).map(|i| pi[i] * f[i]).sum();
        let fbar = DVector::from_fn(n, |i, _| f[i] - mean);
        let ones = DVector::from_element(n, 1.0);
        let a = DMatrix::identity(n, n) - &self.p + &ones * pi.transpose();
        let zf = a
            .lu()
            .solve(&fbar)
            .ok_or_else(|| Error::numeric("fundamental matrix is singular"))?;
        Ok((0..n).map(|i| pi[i] * fbar[i] * (2.0 * zf[i] - fbar[i])).sum())
    }

    /// Draw from row `x` of `P`.
    pub fn draw_next<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        self.rows[x].sample(rng)
    }
}

impl Kernel for FiniteChain {
    type State = usize;

    fn step<R: Rng + ?Sized>(&self, x: &usize, rng: &mut R) -> usize {
        self.draw_next(*x, rng)
    }
}

impl SplitMinorization for FiniteChain {
    fn s(&self, x: &usize) -> f64 {
        match &self.minor {
            Some((eps, _, c)) if c[*x] => *eps,
            _ => 0.0,
        }
    }

    fn nu_density(&self, y: &usize) -> f64 {
        self.minor.as_ref().map_or(0.0, |(_, nu, _)| nu[*y])
    }

    fn transition_density(&self, x: &usize, y: &usize) -> f64 {
        self.p[(*x, *y)]
    }

    fn epsilon(&self) -> Option<f64> {
        self.minor.as_ref().map(|(eps, _, _)| *eps)
    }
}

/// The five-state chain on `{a, b, c, d, e}` whose 4-skeleton split has
/// dependent tours: `m = 4`, `epsilon = 1/8`, `nu_4(d) = nu_4(e) = 1/2`,
/// `C` the whole space.
pub fn five_state() -> FiniteChain {
    let h = 0.5;
    let rows = vec![
        vec![0.0, h, h, 0.0, 0.0],
        vec![0.0, h, 0.0, h, 0.0],
        vec![0.0, 0.0, h, 0.0, h],
        vec![1.0, 0.0, 0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0, 0.0],
    ];
    let labels = ["a", "b", "c", "d", "e"].iter().map(|s| s.to_string()).collect();
    FiniteChain::new(rows, labels).expect("preset is stochastic")
}

/// Split parameters `(m, epsilon, nu_m, C)` for [`five_state`].
pub fn five_state_split() -> (u32, f64, Vec<f64>, Vec<bool>) {
    (4, 0.125, vec![0.0, 0.0, 0.0, 0.5, 0.5], vec![true; 5])
}

/// Two-state control chain with one-step minorization `epsilon = 0.7`,
/// `nu = (3/7, 4/7)` on the whole space.
pub fn two_state_control() -> FiniteChain {
    FiniteChain::unlabelled(vec![vec![0.3, 0.7], vec![0.6, 0.4]])
        .and_then(|c| c.with_minorization(0.7, vec![3.0 / 7.0, 4.0 / 7.0], vec![true, true]))
        .expect("preset is valid")
}

/// The i.i.d. uniform kernel on `{0, 1}`.
pub fn adaptive_p1() -> FiniteChain {
    FiniteChain::unlabelled(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).expect("preset is stochastic")
}

/// `(1 - eps) I + eps P1`.
pub fn adaptive_p2(eps: f64) -> Result<FiniteChain> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::domain(format!("need eps in (0, 1], got {eps}")));
    }
    let stay = 1.0 - eps / 2.0;
    FiniteChain::unlabelled(vec![vec![stay, eps / 2.0], vec![eps / 2.0, stay]])
}
