//! Baxendale's explicit convergence-rate certificate.
//!
//! Given [`DriftParams`], computes a rate `rho < 1` and, for any
//! `gamma in (rho, 1)`, a prefactor `M(gamma)` with
//! `|||P^n - pi|||_V <= M gamma^n`. Formulas differ for general,
//! self-adjoint (reversible) and self-adjoint positive operators and
//! between the atomic (`beta_tilde = 1`) and nonatomic cases.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::drift::DriftParams;
use crate::error::{Error, Result};
use crate::numeric::{bisect, golden_max, SignedLog, BISECTION_MAX_ITER, BISECTION_REL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorClass {
    General,
    /// Reversible chains.
    SelfAdjoint,
    /// Reversible chains with nonnegative spectrum.
    SelfAdjointPositive,
}

impl fmt::Display for OperatorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorClass::General => "general",
            OperatorClass::SelfAdjoint => "self-adjoint",
            OperatorClass::SelfAdjointPositive => "self-adjoint-positive",
        })
    }
}

impl FromStr for OperatorClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "general" => Ok(OperatorClass::General),
            "self-adjoint" | "selfadjoint" | "reversible" => Ok(OperatorClass::SelfAdjoint),
            "self-adjoint-positive" | "selfadjointpositive" | "positive" => {
                Ok(OperatorClass::SelfAdjointPositive)
            }
            other => Err(Error::validation(format!("unknown operator class '{other}'"))),
        }
    }
}

/// Nonatomic geometry: exponents `alpha1`, `alpha2`, the radius `R0` and the
/// function `L(R)` on `(1, R0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub alpha1: f64,
    pub alpha2: f64,
    pub r0: f64,
    pub beta_tilde: f64,
    /// `R0 = (1 - beta_tilde)^{-1/alpha1}`, where `L` has its pole.
    pub pole_at_r0: bool,
}

impl Geometry {
    /// `L(R) = beta_tilde R^alpha2 / (1 - (1 - beta_tilde) R^alpha1)`.
    ///
    /// Returns `+inf` at and beyond the pole.
    pub fn l(&self, r: f64) -> f64 {
        let q = (1.0 - self.beta_tilde) * r.powf(self.alpha1);
        if q >= 1.0 || (self.pole_at_r0 && r >= self.r0) {
            return f64::INFINITY;
        }
        self.beta_tilde * r.powf(self.alpha2) / (1.0 - q)
    }

    fn ln_l(&self, r: f64) -> f64 {
        let ln_r = r.ln();
        let ln_q = (1.0 - self.beta_tilde).ln() + self.alpha1 * ln_r;
        if ln_q >= 0.0 || (self.pole_at_r0 && r >= self.r0) {
            return f64::INFINITY;
        }
        self.beta_tilde.ln() + self.alpha2 * ln_r - (-ln_q.exp_m1()).ln()
    }
}

pub fn geometry(dp: &DriftParams) -> Result<Geometry> {
    dp.validate()?;
    if dp.is_atomic() {
        return Err(Error::domain("geometry is defined for the nonatomic case beta_tilde < 1 only"));
    }
    if dp.k <= dp.beta_tilde {
        return Err(Error::domain(format!(
            "geometry needs K > beta_tilde, got K={}, beta_tilde={}",
            dp.k, dp.beta_tilde
        )));
    }
    let bt = dp.beta_tilde;
    let ln_inv_lambda = -dp.lambda.ln();
    let alpha1 = 1.0 + ((dp.k - bt) / (1.0 - bt)).ln() / ln_inv_lambda;
    let alpha2 = if dp.nu_on_c >= 1.0 {
        1.0
    } else if let Some(kt) = dp.k_tilde {
        1.0 + kt.ln() / ln_inv_lambda
    } else {
        1.0 + (dp.k / bt).ln() / ln_inv_lambda
    };
    let pole = (-(1.0 - bt).ln() / alpha1).exp();
    let inv_lambda = 1.0 / dp.lambda;
    Ok(Geometry { alpha1, alpha2, r0: pole.min(inv_lambda), beta_tilde: bt, pole_at_r0: pole <= inv_lambda })
}

/// Unique `r in (1, R)` with `(r - 1) / (r log^2(R/r)) = e^2 beta (R - 1) / (8 (L - 1))`.
///
/// `L = +inf` yields the limiting root `1`.
pub fn solve_r1(beta: f64, big_r: f64, big_l: f64) -> Result<f64> {
    if !(beta > 0.0) || !(big_r > 1.0) || !(big_l > 1.0) || !big_r.is_finite() {
        return Err(Error::domain(format!("solve_r1 needs beta > 0, R > 1, L > 1 (beta={beta}, R={big_r}, L={big_l})")));
    }
    if big_l.is_infinite() {
        return Ok(1.0);
    }
    let ln_rhs = 2.0 + beta.ln() + (big_r - 1.0).ln() - 8f64.ln() - (big_l - 1.0).ln();
    let ln_big_r = big_r.ln();
    let g = |u: f64| {
        let lr = ln_big_r - u.ln_1p();
        if lr <= 0.0 {
            return f64::INFINITY;
        }
        u.ln() - u.ln_1p() - 2.0 * lr.ln() - ln_rhs
    };
    let span = big_r - 1.0;
    let mut lo = span * 1e-12;
    while g(lo) >= 0.0 {
        lo *= 1e-6;
        if lo < 1e-300 {
            return Err(Error::numeric(format!(
                "solve_r1: cannot bracket the root from below (beta={beta}, R={big_r}, L={big_l})"
            )));
        }
    }
    let mut hi = span * (1.0 - 1e-12);
    let mut shrink = 1e-12;
    while g(hi) <= 0.0 {
        shrink *= 1e-2;
        hi = span * (1.0 - shrink);
        if shrink < 1e-16 {
            return Err(Error::numeric(format!(
                "solve_r1: cannot bracket the root from above (beta={beta}, R={big_r}, L={big_l})"
            )));
        }
    }
    let u = bisect(lo, hi, g, BISECTION_REL_TOL, BISECTION_MAX_ITER)?;
    Ok(1.0 + u)
}

/// `K_1(r, beta, R, L)` for `1 < r < R_1(beta, R, L)`.
pub fn k1(r: f64, beta: f64, big_r: f64, big_l: f64) -> Result<f64> {
    let n = (big_l - 1.0) / (big_r - 1.0);
    let lr = (big_r / r).ln();
    let a = 8.0 * n * (-2f64).exp() * (r - 1.0) / r / (lr * lr);
    let denom = (r - 1.0) * (beta - a);
    if !(denom > 0.0) {
        return Err(Error::domain(format!(
            "K1 denominator is not positive at r={r} (need r below R1); gamma must exceed rho"
        )));
    }
    Ok((2.0 * beta + 2.0 * n.ln() / lr - a) / denom)
}

/// Number of interior grid points seeding the argmax over `R`.
pub const ARGMAX_GRID: usize = 256;

/// Maximiser of `R -> R_1(beta, R, L(R))` over `(1, R0)`.
///
/// Returns `(R_tilde, R_1(beta, R_tilde, L(R_tilde)))`.
pub fn argmax_r1(beta: f64, geo: &Geometry) -> Result<(f64, f64)> {
    let span = geo.r0 - 1.0;
    let eval = |r: f64| -> f64 {
        let l = geo.l(r);
        if !(l > 1.0) {
            return 1.0;
        }
        solve_r1(beta, r, l).unwrap_or(1.0)
    };
    let mut best_i = 1;
    let mut best = f64::NEG_INFINITY;
    for i in 1..=ARGMAX_GRID {
        let r = 1.0 + span * i as f64 / (ARGMAX_GRID + 1) as f64;
        let v = eval(r);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let step = span / (ARGMAX_GRID + 1) as f64;
    let centre = 1.0 + step * best_i as f64;
    let (r_tilde, val) = golden_max(centre - step, centre + step, eval, 1e-14);
    if val >= best {
        Ok((r_tilde, solve_r1(beta, r_tilde, geo.l(r_tilde))?))
    } else {
        Ok((centre, solve_r1(beta, centre, geo.l(centre))?))
    }
}

/// The rate and the auxiliary quantities `M` needs.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RateCore {
    rho: f64,
    geometry: Option<Geometry>,
    /// `(R, L)` at which `K_1` is evaluated for the general class.
    k1_point: Option<(f64, f64)>,
}

fn rate_core(dp: &DriftParams, class: OperatorClass) -> Result<RateCore> {
    dp.validate()?;
    let (beta, lambda, k) = (dp.beta, dp.lambda, dp.k);
    if dp.is_atomic() {
        let inv_lambda = 1.0 / lambda;
        return Ok(match class {
            OperatorClass::General => {
                let l = inv_lambda * k;
                let r1 = solve_r1(beta, inv_lambda, l)?;
                RateCore { rho: 1.0 / r1, geometry: None, k1_point: Some((inv_lambda, l)) }
            }
            OperatorClass::SelfAdjoint => {
                let r2 = if k > lambda + 2.0 * beta {
                    let expo = 1.0 + k.ln() / inv_lambda.ln();
                    let rs = bisect(
                        1.0,
                        inv_lambda,
                        |r| expo * r.ln() - (2.0 * beta * r).ln_1p(),
                        BISECTION_REL_TOL,
                        BISECTION_MAX_ITER,
                    )?;
                    rs.min(inv_lambda)
                } else {
                    inv_lambda
                };
                RateCore { rho: 1.0 / r2, geometry: None, k1_point: None }
            }
            OperatorClass::SelfAdjointPositive => RateCore { rho: lambda, geometry: None, k1_point: None },
        });
    }
    let geo = geometry(dp)?;
    Ok(match class {
        OperatorClass::General => {
            let (r_tilde, r1) = argmax_r1(beta, &geo)?;
            RateCore { rho: 1.0 / r1, geometry: Some(geo), k1_point: Some((r_tilde, geo.l(r_tilde))) }
        }
        OperatorClass::SelfAdjoint => {
            let r0 = geo.r0;
            let r2 = if geo.ln_l(r0) > (2.0 * beta * r0).ln_1p() {
                let hi = if geo.pole_at_r0 { r0 * (1.0 - 1e-15) } else { r0 };
                bisect(
                    1.0,
                    hi,
                    |r| {
                        if r <= 1.0 {
                            return -(2.0 * beta).ln_1p();
                        }
                        geo.ln_l(r) - (2.0 * beta * r).ln_1p()
                    },
                    BISECTION_REL_TOL,
                    BISECTION_MAX_ITER,
                )?
            } else {
                r0
            };
            RateCore { rho: 1.0 / r2, geometry: Some(geo), k1_point: None }
        }
        OperatorClass::SelfAdjointPositive => RateCore { rho: 1.0 / geo.r0, geometry: Some(geo), k1_point: None },
    })
}

/// Convergence rate `rho` for the given operator class.
pub fn rho(dp: &DriftParams, class: OperatorClass) -> Result<f64> {
    Ok(rate_core(dp, class)?.rho)
}

/// Certificate `(rho, gamma, M)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub rho: f64,
    pub gamma: f64,
    /// `M(gamma)`; `+inf` when it exceeds the `f64` range.
    pub m: f64,
    /// `ln M(gamma)`, always finite.
    pub ln_m: f64,
    pub class: OperatorClass,
    pub atomic: bool,
}

fn sl(x: f64) -> SignedLog {
    SignedLog::new(x)
}

/// `gamma^{-a}` as a signed log.
fn gpow_neg(gamma: f64, a: f64) -> SignedLog {
    SignedLog::from_ln(-a * gamma.ln())
}

fn m_signed(dp: &DriftParams, class: OperatorClass, core: &RateCore, gamma: f64) -> Result<SignedLog> {
    let (bt, beta, lambda, k) = (dp.beta_tilde, dp.beta, dp.lambda, dp.k);
    let rho = core.rho;
    let kx = match class {
        OperatorClass::General => {
            let (big_r, big_l) = core.k1_point.expect("general class carries its K1 point");
            k1(1.0 / gamma, beta, big_r, big_l)?
        }
        _ if dp.is_atomic() => 1.0 + 1.0 / (gamma - rho),
        _ => 1.0 + bt.sqrt() / (gamma - rho),
    };
    let gl = sl(gamma - lambda);
    let one_l = sl(1.0 - lambda);
    if dp.is_atomic() {
        let kg = k - lambda / gamma;
        let t1 = sl(lambda.max(kg)).div(gl);
        let t2 = sl(k * kg).div(sl(gamma)).div(gl).mul(sl(kx));
        let t3 = sl(kg * lambda.max(k - lambda)).div(gl).div(one_l);
        let t4 = sl(lambda * (k - 1.0)).div(gl).div(one_l);
        return Ok(t1.add(t2).add(t3).add(t4));
    }
    let geo = core.geometry.expect("nonatomic case carries its geometry");
    let (a1, a2) = (geo.alpha1, geo.alpha2);
    let ln_q = (1.0 - bt).ln() - a1 * gamma.ln();
    if ln_q >= 0.0 {
        return Err(Error::domain(format!("gamma={gamma} too small for the small-set geometry")));
    }
    let d = SignedLog::from_ln((-ln_q.exp_m1()).ln());
    let d2 = d.mul(d);
    let g_a1_m1 = gpow_neg(gamma, a1).add(sl(-1.0));
    let g_a2_m1 = gpow_neg(gamma, a2).add(sl(-1.0));
    let kgl = sl(k * gamma - lambda);

    let inner1 = sl(bt * lambda.max(k - lambda) / (1.0 - lambda))
        .add(sl(1.0 - bt).mul(g_a1_m1).div(sl(1.0 / gamma - 1.0)));
    let t1 = gpow_neg(gamma, a2 + 1.0).mul(kgl).div(gl).div(d2).mul(inner1);
    let t2 = sl(lambda.max(k - lambda / gamma)).div(gl);
    let t3 = sl(bt * k).mul(gpow_neg(gamma, a2 + 2.0)).mul(kgl).div(gl).div(d2).mul(sl(kx));
    let t4 = gpow_neg(gamma, a2).mul(sl(lambda * (k - 1.0))).div(one_l).div(gl).div(d);
    let t5 = sl(k * (k * gamma - lambda - bt * (gamma - lambda))).div(sl(gamma * gamma)).div(gl).div(d);
    let inner6 = g_a2_m1.add(sl(1.0 - bt).mul(g_a1_m1).div(sl(bt)));
    let t6 = sl(k - lambda - bt * (1.0 - lambda)).div(one_l).div(sl(1.0 - gamma)).mul(inner6);
    Ok(t1.add(t2).add(t3).add(t4).add(t5).add(t6))
}

fn finish(dp: &DriftParams, class: OperatorClass, core: &RateCore, gamma: f64) -> Result<RateBound> {
    if !(gamma > core.rho && gamma < 1.0) {
        return Err(Error::domain(format!("gamma must exceed rho and be below 1 (gamma={gamma}, rho={})", core.rho)));
    }
    let m = m_signed(dp, class, core, gamma)?;
    if !(m.sign > 0.0) || !m.ln_abs.is_finite() {
        return Err(Error::numeric(format!("M(gamma={gamma}) is not a finite positive number")));
    }
    Ok(RateBound {
        rho: core.rho,
        gamma,
        m: m.to_f64(),
        ln_m: m.ln_abs,
        class,
        atomic: dp.is_atomic(),
    })
}

/// Prefactor `M(gamma)`.
pub fn big_m(dp: &DriftParams, class: OperatorClass, gamma: f64) -> Result<f64> {
    Ok(rate_bound(dp, class, gamma)?.m)
}

pub fn rate_bound(dp: &DriftParams, class: OperatorClass, gamma: f64) -> Result<RateBound> {
    let core = rate_core(dp, class)?;
    finish(dp, class, &core, gamma)
}

/// Certificates for several `gamma` values sharing one `rho` computation.
/// Entries with `gamma <= rho` are returned as errors in place.
pub fn rate_bounds_on_grid(dp: &DriftParams, class: OperatorClass, gammas: &[f64]) -> Result<Vec<Result<RateBound>>> {
    let core = rate_core(dp, class)?;
    Ok(gammas.iter().map(|&g| finish(dp, class, &core, g)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::power_transform;

    fn table55() -> DriftParams {
        DriftParams::new(0.343_909_446_1, 0.343_909_446_1, 0.662_901_150_4, 2.408_207_69).unwrap()
    }

    #[test]
    fn geometry_of_contracting_normals() {
        let g = geometry(&table55()).unwrap();
        assert_eq!(g.alpha2, 1.0);
        assert!((g.alpha1 - 3.78804).abs() < 1e-4);
        assert!((g.r0 - 1.117685).abs() < 1e-5);
        assert!(g.pole_at_r0);
        assert!(g.l(g.r0).is_infinite());
    }

    #[test]
    fn geometry_rejects_atom() {
        let dp = DriftParams::new(1.0, 0.5, 0.5, 2.0).unwrap();
        assert!(geometry(&dp).is_err());
    }

    #[test]
    fn r0_tends_to_inverse_lambda_as_beta_tilde_grows() {
        let mut prev = 1.0;
        for &eps in &[1e-1, 1e-3, 1e-6, 1e-10, 1e-15] {
            let r0 = geometry(&DriftParams::new(1.0 - eps, 0.5, 0.5, 2.0).unwrap()).unwrap().r0;
            assert!(r0 > prev && r0 <= 2.0);
            prev = r0;
        }
        assert!(2.0 - prev < 0.05);
    }

    #[test]
    fn solve_r1_satisfies_equation() {
        for &(b, r, l) in &[(0.3, 1.5, 4.0), (0.01, 1.05, 1.2), (0.9, 3.0, 100.0)] {
            let r1 = solve_r1(b, r, l).unwrap();
            assert!(r1 > 1.0 && r1 < r);
            let lhs = (r1 - 1.0) / (r1 * (r / r1).ln().powi(2));
            let rhs = std::f64::consts::E.powi(2) * b * (r - 1.0) / (8.0 * (l - 1.0));
            assert!((lhs / rhs - 1.0).abs() < 1e-9);
        }
        assert_eq!(solve_r1(0.3, 1.5, f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn solve_r1_decreases_with_beta() {
        let mut prev = f64::INFINITY;
        for &b in &[0.5, 0.1, 0.01, 1e-4, 1e-8] {
            let r1 = solve_r1(b, 2.0, 3.0).unwrap();
            assert!(r1 < prev);
            prev = r1;
        }
        assert!(prev - 1.0 < 1e-6);
    }

    #[test]
    fn positive_atomic_rate_is_lambda() {
        let dp = DriftParams::new(1.0, 0.5, 0.6629, 2.4).unwrap();
        assert_eq!(rho(&dp, OperatorClass::SelfAdjointPositive).unwrap(), 0.6629);
    }

    #[test]
    fn contracting_normals_rates() {
        let dp = table55();
        let r = rho(&dp, OperatorClass::SelfAdjointPositive).unwrap();
        assert!((r - 0.895).abs() < 1e-3);
        let r2 = rho(&power_transform(&dp, 2.0).unwrap(), OperatorClass::SelfAdjointPositive).unwrap();
        assert!((r2 - 0.899).abs() < 1e-3);
    }

    #[test]
    fn m_diverges_towards_rho() {
        let dp = table55();
        let r = rho(&dp, OperatorClass::SelfAdjointPositive).unwrap();
        let near = big_m(&dp, OperatorClass::SelfAdjointPositive, r + 1e-6).unwrap();
        let far = big_m(&dp, OperatorClass::SelfAdjointPositive, 0.95).unwrap();
        assert!(near > 100.0 * far);
        assert!(matches!(big_m(&dp, OperatorClass::SelfAdjointPositive, r), Err(Error::Domain(_))));
    }

    #[test]
    fn atomic_m_matches_hand_evaluation() {
        let dp = DriftParams::new(1.0, 0.5, 0.5, 2.0).unwrap();
        let class = OperatorClass::SelfAdjointPositive;
        let g = 0.7;
        let (l, k) = (0.5, 2.0);
        let kg: f64 = k - l / g;
        let k2 = 1.0 + 1.0 / (g - l);
        let expect = l.max(kg) / (g - l)
            + k * kg / (g * (g - l)) * k2
            + kg * l.max(k - l) / ((g - l) * (1.0 - l))
            + l * (k - 1.0) / ((g - l) * (1.0 - l));
        assert!((big_m(&dp, class, g).unwrap() / expect - 1.0).abs() < 1e-13);
    }

    #[test]
    fn general_class_has_a_finite_certificate() {
        let dp = table55();
        let r = rho(&dp, OperatorClass::General).unwrap();
        let rb = rate_bound(&dp, OperatorClass::General, 0.5 * (1.0 + r)).unwrap();
        assert!(rb.rho < 1.0 && rb.rho > rho(&dp, OperatorClass::SelfAdjointPositive).unwrap());
        assert!(rb.ln_m.is_finite() && rb.ln_m > 0.0);
    }

    #[test]
    fn parses_class_names() {
        assert_eq!("reversible".parse::<OperatorClass>().unwrap(), OperatorClass::SelfAdjoint);
        assert_eq!(
            OperatorClass::SelfAdjointPositive.to_string().parse::<OperatorClass>().unwrap(),
            OperatorClass::SelfAdjointPositive
        );
        assert!("odd".parse::<OperatorClass>().is_err());
    }
}
