//! Scalar numerics shared by the bound calculators: bracketed root finding,
//! golden-section maximisation, signed log-domain arithmetic and thin
//! wrappers over the special functions we take from `statrs` and `libm`.

use crate::error::{Error, Result};

/// Iteration cap for bisection.
pub const BISECTION_MAX_ITER: usize = 200;
/// Relative tolerance on the bracket width for bisection.
pub const BISECTION_REL_TOL: f64 = 1e-12;

/// Bisection for an increasing-or-decreasing continuous `f` with a sign
/// change on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `rel_tol * |mid|` (or
/// `rel_tol` for brackets around zero).
pub fn bisect<F>(mut lo: f64, mut hi: f64, f: F, rel_tol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(lo < hi) {
        return Err(Error::numeric(format!("bisection: empty bracket [{lo}, {hi}]")));
    }
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() || flo.signum() == fhi.signum() {
        return Err(Error::numeric(format!(
            "bisection: no sign change on [{lo:e}, {hi:e}] (f(lo)={flo:e}, f(hi)={fhi:e})"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= rel_tol * mid.abs().max(f64::MIN_POSITIVE) || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Err(Error::numeric(format!(
        "bisection: no convergence after {max_iter} iterations, bracket [{lo:e}, {hi:e}]"
    )))
}

/// Maximise `f` on `[lo, hi]` by golden-section search.
///
/// Returns `(argmax, max)`. Assumes `f` is unimodal on the interval.
pub fn golden_max<F>(mut lo: f64, mut hi: f64, f: F, rel_tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..300 {
        if hi - lo <= rel_tol * (lo.abs() + hi.abs()) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `ln(e^a + e^b)` without overflow.
pub fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    ln_add(0.0, x)
}

/// A real number stored as sign and natural log of its magnitude, so that
/// products of astronomically large factors stay representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: f64,
    pub ln_abs: f64,
}

#[allow(clippy::should_implement_trait)]
impl SignedLog {
    pub const ZERO: SignedLog = SignedLog { sign: 0.0, ln_abs: f64::NEG_INFINITY };

    pub fn new(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            SignedLog { sign: x.signum(), ln_abs: x.abs().ln() }
        }
    }

    /// A positive number given by its logarithm.
    pub fn from_ln(ln_abs: f64) -> Self {
        SignedLog { sign: 1.0, ln_abs }
    }

    pub fn to_f64(self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.ln_abs.exp()
        }
    }

    pub fn mul(self, o: SignedLog) -> Self {
        if self.sign == 0.0 || o.sign == 0.0 {
            return Self::ZERO;
        }
        SignedLog { sign: self.sign * o.sign, ln_abs: self.ln_abs + o.ln_abs }
    }

    pub fn div(self, o: SignedLog) -> Self {
        if self.sign == 0.0 {
            return Self::ZERO;
        }
        SignedLog { sign: self.sign * o.sign, ln_abs: self.ln_abs - o.ln_abs }
    }

    pub fn add(self, o: SignedLog) -> Self {
        if self.sign == 0.0 {
            return o;
        }
        if o.sign == 0.0 {
            return self;
        }
        if self.sign == o.sign {
            return SignedLog { sign: self.sign, ln_abs: ln_add(self.ln_abs, o.ln_abs) };
        }
        let (big, small) = if self.ln_abs >= o.ln_abs { (self, o) } else { (o, self) };
        let d = small.ln_abs - big.ln_abs;
        if d == 0.0 {
            return Self::ZERO;
        }
        SignedLog { sign: big.sign, ln_abs: big.ln_abs + (-d.exp()).ln_1p() }
    }

    pub fn powf(self, e: f64) -> Self {
        debug_assert!(self.sign > 0.0);
        SignedLog { sign: 1.0, ln_abs: self.ln_abs * e }
    }
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln Phi(x)`, using the asymptotic tail series where `Phi` underflows.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        return norm_cdf(x).ln();
    }
    let z = 1.0 / (x * x);
    let series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z)));
    -0.5 * x * x - (-x).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        statrs::function::gamma::gamma_lr(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        statrs::function::gamma::gamma_ur(a, x)
    }
}

pub fn ln_gamma(a: f64) -> f64 {
    statrs::function::gamma::ln_gamma(a)
}

/// Density of Gamma(shape, rate) at `x`.
pub fn gamma_pdf(shape: f64, rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)).exp()
}

/// Upper-tail p-value of a chi-square statistic.
pub fn chi_square_sf(stat: f64, dof: f64) -> f64 {
    gamma_q(0.5 * dof, 0.5 * stat)
}

/// Asymptotic Kolmogorov distribution tail `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test. Returns `(D, p-value)` using the
/// asymptotic distribution with the Stephens small-sample correction.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|p, q| p.total_cmp(q));
    xb.sort_by(|p, q| p.total_cmp(q));
    let (na, nb) = (xa.len(), xb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = xa[i].min(xb[j]);
        while i < na && xa[i] <= x {
            i += 1;
        }
        while j < nb && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let sq = ne.sqrt();
    (d, kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect(1.0, 2.0, |x| x * x - 2.0, 1e-14, 200).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-13);
    }

    #[test]
    fn bisect_rejects_missing_sign_change() {
        assert!(matches!(bisect(1.0, 2.0, |x| x * x + 1.0, 1e-12, 200), Err(Error::Numeric(_))));
    }

    #[test]
    fn golden_max_of_parabola() {
        let (x, fx) = golden_max(0.0, 3.0, |x| -(x - 1.3) * (x - 1.3) + 2.0, 1e-12);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn signed_log_matches_plain_arithmetic() {
        let a = SignedLog::new(3.5);
        let b = SignedLog::new(-1.25);
        assert!((a.add(b).to_f64() - 2.25).abs() < 1e-14);
        assert!((a.mul(b).to_f64() + 4.375).abs() < 1e-13);
        assert!((b.div(a).to_f64() + 1.25 / 3.5).abs() < 1e-15);
        assert_eq!(a.add(SignedLog::new(-3.5)).to_f64(), 0.0);
        let huge = SignedLog::from_ln(1000.0).mul(SignedLog::from_ln(1000.0));
        assert_eq!(huge.ln_abs, 2000.0);
    }

    // Reference values from scipy.special / scipy.stats.
    #[test]
    fn special_functions_match_reference_values() {
        assert!((norm_cdf(1.2) / 0.884_930_329_778_291_8 - 1.0).abs() < 1e-13);
        assert!((norm_cdf(-7.5) / 3.190_891_672_910_884_4e-14 - 1.0).abs() < 1e-12);
        assert!((ln_norm_cdf(-40.0) + 804.608_442_013_754_2).abs() < 1e-9);
        assert!((ln_norm_cdf(-29.0) - norm_cdf(-29.0).ln()).abs() < 1e-12);
        assert!((norm_quantile(0.95) - 1.644_853_626_951_472_2).abs() < 1e-9);
        assert!((gamma_p(3.5, 2.0) / 0.220_222_591_524_284_06 - 1.0).abs() < 1e-10);
        assert!((gamma_q(25.0, 40.0) / 0.004_482_656_565_573_19 - 1.0).abs() < 1e-10);
        assert!((chi_square_sf(6.635, 1.0) / 0.009_999_419_574_042_536 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ks_identical_samples_do_not_reject() {
        let a: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let (d, p) = ks_two_sample(&a, &a);
        assert_eq!(d, 0.0);
        assert!(p > 0.99);
    }
}
