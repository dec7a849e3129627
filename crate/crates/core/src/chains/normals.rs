use rand::Rng;
use rand_distr::StandardNormal;

use super::{Kernel, SplitMinorization};
use crate::drift::DriftParams;
use crate::error::{Error, Result};
use crate::numeric::{norm_cdf, norm_pdf};
use crate::planner::PlanProblem;
use crate::ratebounds::OperatorClass;

/// The AR(1) kernel `P(x, .) = N(theta x, 1 - theta^2)` with small set
/// `C = [-c, c]`. Its stationary law is `N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractingNormals {
    pub theta: f64,
    pub c: f64,
    sd: f64,
    beta_tilde: f64,
}

impl ContractingNormals {
    pub fn new(theta: f64, c: f64) -> Result<Self> {
        if !(theta.abs() < 1.0) {
            return Err(Error::domain(format!("need |theta| < 1, got {theta}")));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::domain(format!("small-set radius must be positive, got {c}")));
        }
        let sd = (1.0 - theta * theta).sqrt();
        Ok(ContractingNormals { theta, c, sd, beta_tilde: beta_tilde(theta, c) })
    }

    pub fn beta_tilde(&self) -> f64 {
        self.beta_tilde
    }

    /// `pi(C)` under the stationary `N(0, 1)`.
    pub fn pi_c(&self) -> f64 {
        norm_cdf(self.c) - norm_cdf(-self.c)
    }

    pub fn in_c(&self, x: f64) -> bool {
        x.abs() <= self.c
    }
}

/// `theta x + sqrt(1 - theta^2) Z`.
pub fn cn_step<R: Rng + ?Sized>(theta: f64, x: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    theta * x + (1.0 - theta * theta).sqrt() * z
}

fn beta_tilde(theta: f64, c: f64) -> f64 {
    let s = (1.0 - theta * theta).sqrt();
    let a = theta.abs();
    2.0 * (norm_cdf((1.0 + a) * c / s) - norm_cdf(a * c / s))
}

/// Drift and minorization constants for `V(x) = 1 + x^2` and `C = [-c, c]`.
pub fn cn_drift(theta: f64, c: f64) -> Result<(DriftParams, OperatorClass)> {
    if !(theta.abs() < 1.0) {
        return Err(Error::domain(format!("need |theta| < 1, got {theta}")));
    }
    if !(c > 1.0) {
        return Err(Error::domain(format!("need c > 1 for lambda < 1, got {c}")));
    }
    let t2 = theta * theta;
    let lambda = t2 + 2.0 * (1.0 - t2) / (1.0 + c * c);
    let k = 2.0 + t2 * (c * c - 1.0);
    let bt = beta_tilde(theta, c);
    let dp = DriftParams::new(bt, bt, lambda, k)?.with_pi_c(norm_cdf(c) - norm_cdf(-c))?;
    Ok((dp, OperatorClass::SelfAdjointPositive))
}

/// Planning problem for `f(x) = x` (so `|f^2|_V = 1`) started at `x0 = 0`,
/// with `pi V` and `|f_c^2|_V` bounded through `pi(C) <= 1`.
pub fn cn_plan_problem(theta: f64, c: f64) -> Result<PlanProblem> {
    let (dp, class) = cn_drift(theta, c)?;
    Ok(PlanProblem::new(dp.with_pi_c(1.0)?, class, 1.0, 1.0))
}

impl Kernel for ContractingNormals {
    type State = f64;

    fn step<R: Rng + ?Sized>(&self, x: &f64, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.theta * x + self.sd * z
    }
}

impl SplitMinorization for ContractingNormals {
    fn s(&self, x: &f64) -> f64 {
        if self.in_c(*x) {
            self.beta_tilde
        } else {
            0.0
        }
    }

    fn nu_density(&self, y: &f64) -> f64 {
        if !self.in_c(*y) {
            return 0.0;
        }
        norm_pdf((y.abs() + self.theta.abs() * self.c) / self.sd) / self.sd / self.beta_tilde
    }

    fn transition_density(&self, x: &f64, y: &f64) -> f64 {
        norm_pdf((y - self.theta * x) / self.sd) / self.sd
    }

    fn epsilon(&self) -> Option<f64> {
        Some(self.beta_tilde)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn table_constants() {
        let (dp, class) = cn_drift(0.5, 1.6226).unwrap();
        assert!((dp.lambda - 0.662_90).abs() < 5e-6);
        assert!((dp.k - 2.408_21).abs() < 5e-6);
        assert!((dp.beta_tilde - 0.3439).abs() < 5e-5);
        assert_eq!(class, OperatorClass::SelfAdjointPositive);
    }

    #[test]
    fn theta_zero_and_symmetry() {
        let c = 2.5;
        let (dp, _) = cn_drift(0.0, c).unwrap();
        assert!((dp.lambda - 2.0 / (1.0 + c * c)).abs() < 1e-15);
        assert_eq!(dp.k, 2.0);
        assert_eq!(cn_drift(-0.7, c).unwrap().0, cn_drift(0.7, c).unwrap().0);
        assert!(cn_drift(0.5, 1.0).is_err());
    }

    // Quadrature of min_{|x|<=c} N(theta x, 1-theta^2)(y) over y in C.
    #[test]
    fn minorization_reproduces_beta_tilde() {
        for &(theta, c) in &[(0.5, 1.6226), (-0.3, 2.0), (0.9, 1.2)] {
            let k = ContractingNormals::new(theta, c).unwrap();
            let n = 20_000;
            let h = 2.0 * c / n as f64;
            let mut acc = 0.0;
            for i in 0..n {
                let y = -c + (i as f64 + 0.5) * h;
                let lo = k.transition_density(&-c, &y);
                let hi = k.transition_density(&c, &y);
                let pointwise = lo.min(hi);
                assert!(pointwise >= k.s(&0.3) * k.nu_density(&y) - 1e-12);
                acc += pointwise * h;
            }
            assert!((acc - k.beta_tilde()).abs() < 1e-6, "{acc} vs {}", k.beta_tilde());
        }
    }

    #[test]
    fn lag_one_autocorrelation_is_theta() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let theta = 0.5;
        let n = 200_000;
        let mut x = 0.0;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for _ in 0..n {
            let y = cn_step(theta, x, &mut rng);
            sxy += x * y;
            sxx += x * x;
            x = y;
        }
        assert!((sxy / sxx - theta).abs() < 3.0 / (n as f64).sqrt());
    }
}
