//! Drift and minorization constants for the two random-effects samplers,
//! and the pipeline that turns them into a simulation plan.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::hrem::{nu1, nu2, HremData, HremHyper, HremState};
use crate::drift::{optimize_pi_v_bound, rosenthal_to_baxendale, DriftParams, RosenthalDrift};
use crate::error::{Error, Result};
use crate::numeric::{bisect, gamma_p, gamma_q, golden_max, ln_add, ln_norm_cdf, BISECTION_MAX_ITER};
use crate::planner::{optimize_plan, Plan, PlanGrids, PlanMode, PlanProblem};
use crate::ratebounds::OperatorClass;

/// The `delta_i` and `c_i` constants shared by the drift conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HremConstants {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub delta4: f64,
    pub delta5: f64,
    pub delta6: f64,
    pub delta7: f64,
    /// `max(delta1, delta3)`.
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
}

pub fn constants(data: &HremData, hyper: &HremHyper) -> HremConstants {
    let k = data.k() as f64;
    let big_m = data.big_m as f64;
    let delta1 = 1.0 / (2.0 * hyper.a1 + k - 2.0);
    let delta2 = 1.0 / (2.0 * hyper.a2 + big_m - 2.0);
    let delta3 = (k + 1.0) * delta2;
    let delta4 = delta2 * data.m.iter().map(|&m| 1.0 / m as f64).sum::<f64>();
    let delta5 = k * delta2;
    let kk = k * k + 2.0 * k * hyper.a1;
    HremConstants {
        delta1,
        delta2,
        delta3,
        delta4,
        delta5,
        delta6: kk / (2.0 * hyper.s0 + kk),
        delta7: 1.0 / (2.0 * (hyper.a1 - 1.0)),
        delta: delta1.max(delta3),
        c1: 2.0 * hyper.b1 / (2.0 * hyper.a1 + k - 2.0),
        c2: (2.0 * hyper.b2 + data.sse) / (2.0 * hyper.a2 + big_m - 2.0),
    }
}

/// Weights of the block-sampler drift function
/// `V = phi1 sum (theta_i - mu)^2 + phi2 sum (theta_i - ybar_i)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BlockPhi {
    Unbalanced { phi1: f64, phi2: f64 },
    /// Balanced design: `phi2 = 1/m`.
    Balanced { phi: f64 },
}

impl BlockPhi {
    /// `(phi1, phi2)`.
    pub fn weights(&self, data: &HremData) -> Result<(f64, f64)> {
        match *self {
            BlockPhi::Unbalanced { phi1, phi2 } => Ok((phi1, phi2)),
            BlockPhi::Balanced { phi } => {
                let m = data
                    .balanced()
                    .ok_or_else(|| Error::validation("balanced drift requested but group sizes differ"))?;
                Ok((phi, 1.0 / m as f64))
            }
        }
    }
}

/// `V_R(theta, mu)` for the block sampler.
pub fn block_v(phi: &BlockPhi, data: &HremData, theta: &[f64], mu: f64) -> Result<f64> {
    let (p1, p2) = phi.weights(data)?;
    Ok(p1 * nu1(theta, mu) + p2 * nu2(theta, data))
}

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::validation(format!("{name} must lie in (0, 1), got {v}")));
    }
    Ok(())
}

/// Rosenthal-type drift for the block sampler.
pub fn block_drift(data: &HremData, hyper: &HremHyper, lambda_r: f64, phi: BlockPhi) -> Result<RosenthalDrift> {
    hyper.validate()?;
    let c = constants(data, hyper);
    check_open_unit("lambda_R", lambda_r)?;
    if !(lambda_r > c.delta) {
        return Err(Error::validation(format!("need lambda_R > delta = {}, got {lambda_r}", c.delta)));
    }
    let k = data.k() as f64;
    let k_r = match phi {
        BlockPhi::Unbalanced { phi1, phi2 } => {
            if !(phi1 > 0.0 && phi2 > 0.0) {
                return Err(Error::validation("phi1 and phi2 must be positive"));
            }
            let lhs = phi1 * c.delta4 / phi2 + c.delta;
            if !(lhs < lambda_r) {
                return Err(Error::validation(format!(
                    "precondition phi1 delta4 / phi2 + delta < lambda_R fails: {lhs} >= {lambda_r}"
                )));
            }
            let d2 = data.delta(hyper.m0).powi(2);
            phi1 * (c.c1 + c.c2 * c.delta4 / c.delta2 + k * d2)
                + phi2 * (c.c2 * (k + 1.0) + data.big_m as f64 * d2)
        }
        BlockPhi::Balanced { phi } => {
            let m = data
                .balanced()
                .ok_or_else(|| Error::validation("balanced drift requested but group sizes differ"))?
                as f64;
            if !(phi > 0.0) {
                return Err(Error::validation("phi must be positive"));
            }
            let lhs = phi * c.delta5 + c.delta;
            if !(lhs < lambda_r) {
                return Err(Error::validation(format!(
                    "precondition phi delta5 + delta < lambda_R fails: {lhs} >= {lambda_r}"
                )));
            }
            let spread: f64 = data
                .ybar_i
                .iter()
                .map(|yi| ((data.ybar - yi).powi(2)).max((hyper.m0 - yi).powi(2)))
                .sum();
            phi * c.c1 + (phi * k + k + 1.0) * c.c2 / m + phi.max(1.0) * spread
        }
    };
    RosenthalDrift::new(lambda_r, k_r)
}

/// Half of the admissible range for the drift weights at a given
/// `lambda_R`: `phi = (lambda_R - delta) / (2 delta5)` for balanced data,
/// otherwise `phi2 = 1`, `phi1 = (lambda_R - delta) / (2 delta4)`.
pub fn default_block_phi(data: &HremData, hyper: &HremHyper, lambda_r: f64) -> BlockPhi {
    let c = constants(data, hyper);
    let slack = lambda_r - c.delta;
    match data.balanced() {
        Some(_) => BlockPhi::Balanced { phi: slack / (2.0 * c.delta5) },
        None => BlockPhi::Unbalanced { phi1: slack / (2.0 * c.delta4), phi2: 1.0 },
    }
}

/// Minorization constant of the block sampler on `{V_R <= d_R}`:
/// the product of the masses of the two truncated-Gamma minima.
pub fn block_minorization(d_r: f64, phi1: f64, phi2: f64, hyper: &HremHyper, data: &HremData) -> Result<f64> {
    if !(d_r > 0.0) || !d_r.is_finite() {
        return Err(Error::domain(format!("d_R must be positive, got {d_r}")));
    }
    if !(phi1 > 0.0 && phi2 > 0.0) {
        return Err(Error::domain("phi1 and phi2 must be positive"));
    }
    let ((s1, r1lo, r1hi, x1), (s2, r2lo, r2hi, x2)) = block_minorization_pieces(d_r, phi1, phi2, hyper, data);
    let i1 = gamma_p(s1, r1lo * x1) + gamma_q(s1, r1hi * x1);
    let i2 = gamma_p(s2, r2lo * x2) + gamma_q(s2, r2hi * x2);
    Ok((i1.ln() + i2.ln()).exp().min(1.0))
}

/// `ln` of [`block_minorization`].
pub fn block_ln_minorization(d_r: f64, phi1: f64, phi2: f64, hyper: &HremHyper, data: &HremData) -> Result<f64> {
    Ok(block_minorization(d_r, phi1, phi2, hyper, data)?.ln())
}

/// `(shape, rate below, rate above, switch point)` for `h1` and `h2`.
#[allow(clippy::type_complexity)]
pub fn block_minorization_pieces(
    d_r: f64,
    phi1: f64,
    phi2: f64,
    hyper: &HremHyper,
    data: &HremData,
) -> ((f64, f64, f64, f64), (f64, f64, f64, f64)) {
    let k = data.k() as f64;
    let big_m = data.big_m as f64;
    let s1 = k / 2.0 + hyper.a1;
    let x1 = phi1 * (k + 2.0 * hyper.a1) / d_r * (d_r / (2.0 * hyper.b1 * phi1)).ln_1p();
    let s2 = big_m / 2.0 + hyper.a2;
    let x2 = phi2 * (big_m + 2.0 * hyper.a2) / d_r * (d_r / (phi2 * (2.0 * hyper.b2 + data.sse))).ln_1p();
    (
        (s1, hyper.b1, d_r / (2.0 * phi1) + hyper.b1, x1),
        (s2, data.sse / 2.0 + hyper.b2, (d_r + phi2 * data.sse) / (2.0 * phi2) + hyper.b2, x2),
    )
}

/// Default `rho1` for the fixed-scan drift: midpoint of
/// `((K + delta6/delta7) delta1, 1)`.
pub fn default_rho1(data: &HremData, hyper: &HremHyper) -> f64 {
    let c = constants(data, hyper);
    let lo = (data.k() as f64 + c.delta6 / c.delta7) * c.delta1;
    0.5 * (lo + 1.0)
}

/// Admissible interval for `lambda_R` in the fixed-scan drift.
pub fn gibbs_lambda_floor(data: &HremData, hyper: &HremHyper, rho1: f64) -> f64 {
    let c = constants(data, hyper);
    rho1.max(c.delta6).max(c.delta7)
}

fn check_gibbs_standing(data: &HremData, hyper: &HremHyper, c3: f64) -> Result<()> {
    hyper.validate()?;
    if !(hyper.a1 > 1.5) {
        return Err(Error::validation(format!("fixed-scan drift needs a1 > 3/2, got {}", hyper.a1)));
    }
    let mmin = *data.m.iter().min().expect("K >= 3");
    let mmax = *data.m.iter().max().expect("K >= 3");
    if !(5 * mmin > mmax) {
        return Err(Error::validation(format!("fixed-scan drift needs 5 m' > m'', got m' = {mmin}, m'' = {mmax}")));
    }
    if !(c3 > 0.0 && c3 < hyper.b1.min(hyper.b2)) {
        return Err(Error::validation(format!(
            "c3 must lie in (0, min(b1, b2)) = (0, {}), got {c3}",
            hyper.b1.min(hyper.b2)
        )));
    }
    Ok(())
}

/// Rosenthal-type drift for the fixed-scan sampler.
pub fn gibbs_drift(
    data: &HremData,
    hyper: &HremHyper,
    lambda_r: f64,
    c3: f64,
    rho1: Option<f64>,
) -> Result<RosenthalDrift> {
    check_gibbs_standing(data, hyper, c3)?;
    let c = constants(data, hyper);
    let k = data.k() as f64;
    let rho1 = rho1.unwrap_or_else(|| default_rho1(data, hyper));
    let rho1_lo = (k + c.delta6 / c.delta7) * c.delta1;
    if !(rho1 > rho1_lo && rho1 < 1.0) {
        return Err(Error::validation(format!("rho1 must lie in ({rho1_lo}, 1), got {rho1}")));
    }
    let floor = rho1.max(c.delta6).max(c.delta7);
    if !(lambda_r > floor && lambda_r < 1.0) {
        return Err(Error::validation(format!(
            "lambda_R must lie in (max(rho1, delta6, delta7), 1) = ({floor}, 1), got {lambda_r}"
        )));
    }
    let big_m = data.big_m as f64;
    let t1 = (hyper.b1 / (hyper.b1 - c3)).powf(hyper.a1 + k / 2.0);
    let t2 = (hyper.b2 / (hyper.b2 - c3)).powf(hyper.a2 + big_m / 2.0);
    let t3 = (c.delta6 + c.delta7) * (1.0 / hyper.s0 + (hyper.m0 - data.ybar).powi(2) + data.s2 / k);
    let t4 = 2.0 * hyper.b1 * c.delta7 / k;
    RosenthalDrift::new(lambda_r, t1 + t2 + t3 + t4)
}

/// `V_R(theta, lambda)` for the fixed-scan sampler.
pub fn gibbs_v(c3: f64, data: &HremData, hyper: &HremHyper, state: &HremState) -> f64 {
    let c = constants(data, hyper);
    let k = data.k() as f64;
    let lt = state.lambda_theta;
    let nu3 = k * lt / (hyper.s0 + k * lt) * (state.theta_bar() - data.ybar).powi(2);
    (c3 * lt).exp() + (c3 * state.lambda_e).exp() + c.delta7 / (k * c.delta1 * lt) + nu3
}

/// Smallest admissible `d_R` for the fixed-scan minorization, i.e. the
/// root of `d ln d = c3 delta7 / (K delta1)`.
pub fn gibbs_min_d_r(c3: f64, data: &HremData, hyper: &HremHyper) -> Result<f64> {
    let c = constants(data, hyper);
    let thr = c3 * c.delta7 / (data.k() as f64 * c.delta1);
    let mut hi: f64 = 2.0;
    while hi * hi.ln() <= thr {
        hi *= 2.0;
    }
    bisect(1.0, hi, |d| d * d.ln() - thr, 1e-14, BISECTION_MAX_ITER)
}

/// The sub-terms of the closed-form fixed-scan minorization constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GibbsMinorTerms {
    pub c4: f64,
    pub c_l: f64,
    pub c_u: f64,
    pub nu: f64,
    pub m_l: f64,
    pub m_u: f64,
    pub ln_beta: f64,
}

pub fn gibbs_minorization_terms(d_r: f64, c3: f64, data: &HremData, hyper: &HremHyper) -> Result<GibbsMinorTerms> {
    check_gibbs_standing(data, hyper, c3)?;
    let c = constants(data, hyper);
    let k = data.k() as f64;
    let thr = c3 * c.delta7 / (k * c.delta1);
    if !(d_r > 1.0 && d_r * d_r.ln() > thr) {
        return Err(Error::validation(format!("precondition d_R ln d_R > c3 delta7 / (K delta1) = {thr} fails for d_R = {d_r}")));
    }
    let ld = d_r.ln() / c3;
    let c4 = c.delta7 / (k * c.delta1 * d_r);
    let w = ((hyper.m0 - data.ybar).powi(2) + d_r).sqrt();
    let (c_l, c_u) = (data.ybar - w, data.ybar + w);
    let sum_frac: f64 = data.m.iter().map(|&m| m as f64 / (1.0 + m as f64)).sum();
    let sum_yfrac: f64 = data.m.iter().zip(&data.ybar_i).map(|(&m, y)| y * m as f64 / (1.0 + m as f64)).sum();
    let sum_y2frac: f64 =
        data.m.iter().zip(&data.ybar_i).map(|(&m, y)| y * y * m as f64 / (1.0 + m as f64)).sum();
    let nu = 1.0 / (hyper.s0 + ld * (k + sum_frac));
    let m_l = nu * (c_l * hyper.s0 + ld * (k * c_l + sum_yfrac));
    let m_u = nu * (c_u * hyper.s0 + ld * (k * c_u + sum_yfrac));
    let sn = nu.sqrt();
    let e_u = -c_u * c_u * hyper.s0 / 2.0 - k * c_u * c_u * ld / 2.0 + m_u * m_u / (2.0 * nu);
    let e_l = -c_l * c_l * hyper.s0 / 2.0 - k * c_l * c_l * ld / 2.0 + m_l * m_l / (2.0 * nu);
    let tail = ln_add(e_u + ln_norm_cdf((data.ybar - m_u) / sn), e_l + ln_norm_cdf((m_l - data.ybar) / sn));
    let ln_pi: f64 = data.m.iter().map(|&m| (1.0 + m as f64).ln()).sum();
    let ln_beta = k / 2.0 * (c4 / ld).ln() + 0.5 * (nu * (hyper.s0 + k * c4)).ln() - 0.5 * ln_pi
        - ld / 2.0 * sum_y2frac
        + tail;
    Ok(GibbsMinorTerms { c4, c_l, c_u, nu, m_l, m_u, ln_beta })
}

/// Minorization constant of the fixed-scan sampler on `{V_R <= d_R}`.
pub fn gibbs_minorization(d_r: f64, c3: f64, data: &HremData, hyper: &HremHyper) -> Result<f64> {
    let t = gibbs_minorization_terms(d_r, c3, data, hyper)?;
    let b = t.ln_beta.exp();
    if b == 0.0 {
        log::warn!("fixed-scan minorization constant underflows (ln = {})", t.ln_beta);
    }
    Ok(b.min(1.0))
}

/// Posterior quantity whose mean is to be estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HremTarget {
    Mu,
    /// Zero-based group index.
    Theta(usize),
    LambdaTheta,
    LambdaE,
}

impl fmt::Display for HremTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HremTarget::Mu => write!(f, "mu"),
            HremTarget::Theta(i) => write!(f, "theta{}", i + 1),
            HremTarget::LambdaTheta => write!(f, "lambda_theta"),
            HremTarget::LambdaE => write!(f, "lambda_e"),
        }
    }
}

impl FromStr for HremTarget {
    type Err = Error;

    /// `mu`, `lambda_theta`, `lambda_e`, or `theta<i>` with `i` one-based.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mu" => Ok(HremTarget::Mu),
            "lambda_theta" => Ok(HremTarget::LambdaTheta),
            "lambda_e" => Ok(HremTarget::LambdaE),
            _ => match s.strip_prefix("theta").and_then(|n| n.parse::<usize>().ok()) {
                Some(i) if i >= 1 => Ok(HremTarget::Theta(i - 1)),
                _ => Err(Error::validation(format!(
                    "unknown target `{s}` (expected mu, lambda_theta, lambda_e or theta<i>)"
                ))),
            },
        }
    }
}

impl HremTarget {
    pub fn value(&self, s: &HremState) -> f64 {
        match *self {
            HremTarget::Mu => s.mu,
            HremTarget::Theta(i) => s.theta[i],
            HremTarget::LambdaTheta => s.lambda_theta,
            HremTarget::LambdaE => s.lambda_e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HremSampler {
    Block,
    FixedScan,
}

impl fmt::Display for HremSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HremSampler::Block => "block",
            HremSampler::FixedScan => "fixed-scan",
        })
    }
}

impl FromStr for HremSampler {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "block" => Ok(HremSampler::Block),
            "fixed-scan" | "fixed" | "gibbs" => Ok(HremSampler::FixedScan),
            _ => Err(Error::validation(format!("unknown sampler `{s}` (expected block or fixed-scan)"))),
        }
    }
}

/// The only sampler whose drift function dominates `f^2` for the target.
pub fn sampler_for(target: HremTarget, requested: Option<HremSampler>) -> Result<HremSampler> {
    let needed = match target {
        HremTarget::Mu | HremTarget::Theta(_) => HremSampler::Block,
        HremTarget::LambdaTheta | HremTarget::LambdaE => HremSampler::FixedScan,
    };
    match requested {
        Some(r) if r != needed => Err(Error::validation(format!(
            "target {target} requires the {needed} sampler: the {r} drift function does not dominate {target}^2"
        ))),
        _ => Ok(needed),
    }
}

/// Bound on `|f^2|_V` for `V = V_R + 1`.
///
/// Block sampler: `mu - ybar` splits as the averages of `mu - theta_i`,
/// `theta_i - ybar_i` plus a constant, and Cauchy–Schwarz with optimal
/// weights gives `1/(K phi1) + 1/(K phi2) + ybar^2`; likewise
/// `theta_i^2 <= (1/phi2 + ybar_i^2) V`. Fixed-scan: `V >= 2 + e^{c3 x}`
/// for either precision `x`.
pub fn target_fv_bound(target: HremTarget, data: &HremData, phi: Option<(f64, f64)>, c3: Option<f64>) -> Result<f64> {
    let k = data.k() as f64;
    match target {
        HremTarget::Mu => {
            let (p1, p2) = phi.ok_or_else(|| Error::validation("mu target needs the block drift weights"))?;
            Ok(1.0 / (k * p1) + 1.0 / (k * p2) + data.ybar * data.ybar)
        }
        HremTarget::Theta(i) => {
            let (_, p2) = phi.ok_or_else(|| Error::validation("theta target needs the block drift weights"))?;
            let y = *data
                .ybar_i
                .get(i)
                .ok_or_else(|| Error::validation(format!("theta{} out of range (K = {})", i + 1, data.k())))?;
            Ok(1.0 / p2 + y * y)
        }
        HremTarget::LambdaTheta | HremTarget::LambdaE => {
            let c3 = c3.ok_or_else(|| Error::validation("precision targets need c3"))?;
            let hi = 60.0 / c3;
            let (_, v) = golden_max(0.0, hi, |x| x * x / (2.0 + (c3 * x).exp()), 1e-12);
            Ok(v)
        }
    }
}

/// User choices for [`hrem_plan`]; `None` fields take documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HremPlanSettings {
    pub target: HremTarget,
    pub sampler: Option<HremSampler>,
    /// Default: midpoint of the admissible interval.
    pub lambda_r: Option<f64>,
    /// Default: [`default_block_phi`].
    pub phi: Option<BlockPhi>,
    /// Default: `min(b1, b2) / 2`.
    pub c3: Option<f64>,
    pub rho1: Option<f64>,
    /// Conversion parameters `d` scanned for the Baxendale constants.
    pub d_grid: Vec<f64>,
    pub eps: f64,
    pub alpha: f64,
    pub mode: PlanMode,
    /// Points per rate grid, placed in `(rho, 1)`.
    pub n_gamma: usize,
    pub a_grid: Option<Vec<f64>>,
}

impl HremPlanSettings {
    pub fn new(target: HremTarget, eps: f64, alpha: f64) -> Self {
        HremPlanSettings {
            target,
            sampler: None,
            lambda_r: None,
            phi: None,
            c3: None,
            rho1: None,
            d_grid: (0..33).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 32.0)).collect(),
            eps,
            alpha,
            mode: PlanMode::OneWalk,
            n_gamma: 24,
            a_grid: None,
        }
    }
}

/// A named precondition and whether it held.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

fn check(name: &str, holds: bool, detail: String) -> Check {
    Check { name: name.to_string(), holds, detail }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HremPlanReport {
    pub target: HremTarget,
    pub sampler: HremSampler,
    pub class: OperatorClass,
    pub lambda_r: f64,
    pub phi: Option<BlockPhi>,
    pub c3: Option<f64>,
    pub rho1: Option<f64>,
    /// Rosenthal drift with the chosen small-set level and its constant.
    pub rosenthal: RosenthalDrift,
    /// Conversion parameter `d` that produced the cheapest plan.
    pub d: f64,
    pub drift: DriftParams,
    pub fv_bound: f64,
    pub pi_v: f64,
    pub v_x0: f64,
    pub start: HremState,
    pub checks: Vec<Check>,
    pub plan: Plan,
}

fn prepare(data: &HremData, hyper: &HremHyper, set: &HremPlanSettings) -> Result<Setup> {
    hyper.validate()?;
    let sampler = sampler_for(set.target, set.sampler)?;
    if let HremTarget::Theta(i) = set.target {
        if i >= data.k() {
            return Err(Error::validation(format!("theta{} out of range (K = {})", i + 1, data.k())));
        }
    }
    let c = constants(data, hyper);
    let mut checks = vec![check("K >= 3", data.k() >= 3, format!("K = {}", data.k()))];
    checks.push(check(
        "min m_i >= 2",
        data.m.iter().all(|&m| m >= 2),
        format!("m = {:?}", data.m),
    ));
    let start = HremState::at_data(data);
    let (rd, phi, c3, rho1, fv, v_x0, min_d_r);
    match sampler {
        HremSampler::Block => {
            let lr = set.lambda_r.unwrap_or(0.5 * (c.delta + 1.0));
            let p = set.phi.unwrap_or_else(|| default_block_phi(data, hyper, lr));
            checks.push(check("lambda_R in (delta, 1)", lr > c.delta && lr < 1.0, format!("delta = {}, lambda_R = {lr}", c.delta)));
            rd = block_drift(data, hyper, lr, p)?;
            let w = p.weights(data)?;
            checks.push(match p {
                BlockPhi::Unbalanced { phi1, phi2 } => check(
                    "phi1 delta4 / phi2 + delta < lambda_R",
                    true,
                    format!("{} < {lr}", phi1 * c.delta4 / phi2 + c.delta),
                ),
                BlockPhi::Balanced { phi } => {
                    check("phi delta5 + delta < lambda_R", true, format!("{} < {lr}", phi * c.delta5 + c.delta))
                }
            });
            fv = target_fv_bound(set.target, data, Some(w), None)?;
            v_x0 = 1.0 + block_v(&p, data, &start.theta, start.mu)?;
            phi = Some(p);
            c3 = None;
            rho1 = None;
            min_d_r = 0.0;
        }
        HremSampler::FixedScan => {
            let cc = set.c3.unwrap_or(0.5 * hyper.b1.min(hyper.b2));
            let r1 = set.rho1.unwrap_or_else(|| default_rho1(data, hyper));
            let floor = gibbs_lambda_floor(data, hyper, r1);
            let lr = set.lambda_r.unwrap_or(0.5 * (floor + 1.0));
            checks.push(check("a1 > 3/2", hyper.a1 > 1.5, format!("a1 = {}", hyper.a1)));
            let (mmin, mmax) = (*data.m.iter().min().unwrap(), *data.m.iter().max().unwrap());
            checks.push(check("5 m' > m''", 5 * mmin > mmax, format!("m' = {mmin}, m'' = {mmax}")));
            checks.push(check(
                "c3 in (0, min(b1, b2))",
                cc > 0.0 && cc < hyper.b1.min(hyper.b2),
                format!("c3 = {cc}"),
            ));
            checks.push(check(
                "lambda_R in (max(rho1, delta6, delta7), 1)",
                lr > floor && lr < 1.0,
                format!("floor = {floor}, lambda_R = {lr}"),
            ));
            rd = gibbs_drift(data, hyper, lr, cc, Some(r1))?;
            fv = target_fv_bound(set.target, data, None, Some(cc))?;
            v_x0 = 1.0 + gibbs_v(cc, data, hyper, &start);
            min_d_r = gibbs_min_d_r(cc, data, hyper)? * (1.0 + 1e-9);
            phi = None;
            c3 = Some(cc);
            rho1 = Some(r1);
        }
    }
    Ok(Setup { sampler, checks, start, rd, phi, c3, rho1, fv, v_x0, min_d_r })
}

struct Setup {
    sampler: HremSampler,
    checks: Vec<Check>,
    start: HremState,
    rd: RosenthalDrift,
    phi: Option<BlockPhi>,
    c3: Option<f64>,
    rho1: Option<f64>,
    fv: f64,
    v_x0: f64,
    min_d_r: f64,
}

impl Setup {
    fn d_r(&self, d: f64) -> f64 {
        self.rd.small_set_level(d).max(self.min_d_r)
    }

    fn ln_beta(&self, data: &HremData, hyper: &HremHyper, d_r: f64) -> Result<f64> {
        match self.sampler {
            HremSampler::Block => {
                let (p1, p2) = self.phi.expect("block weights").weights(data)?;
                block_ln_minorization(d_r, p1, p2, hyper, data)
            }
            HremSampler::FixedScan => {
                Ok(gibbs_minorization_terms(d_r, self.c3.expect("c3"), data, hyper)?.ln_beta.min(0.0))
            }
        }
    }
}

/// Largest minorization constant over the `d` grid, in logs so that
/// values below the floating-point range stay comparable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinorizationScan {
    pub sampler: HremSampler,
    pub d: f64,
    pub d_r: f64,
    pub ln_beta_tilde_r: f64,
    pub c3: Option<f64>,
    pub phi: Option<BlockPhi>,
    /// Drift preconditions checked before the scan.
    pub checks: Vec<Check>,
}

pub fn hrem_minorization_scan(data: &HremData, hyper: &HremHyper, set: &HremPlanSettings) -> Result<MinorizationScan> {
    let su = prepare(data, hyper, set)?;
    let mut best: Option<(f64, f64, f64)> = None;
    for &d in &set.d_grid {
        let d_r = su.d_r(d);
        let lb = su.ln_beta(data, hyper, d_r)?;
        if best.is_none_or(|b| lb > b.2) {
            best = Some((d, d_r, lb));
        }
    }
    let (d, d_r, lb) = best.ok_or_else(|| Error::validation("empty d grid"))?;
    Ok(MinorizationScan { sampler: su.sampler, d, d_r, ln_beta_tilde_r: lb, c3: su.c3, phi: su.phi, checks: su.checks })
}

/// Ingested data to plan: Rosenthal drift and minorization, conversion
/// to Baxendale constants over the `d` grid, then the cheapest plan.
pub fn hrem_plan(data: &HremData, hyper: &HremHyper, set: &HremPlanSettings) -> Result<HremPlanReport> {
    let su = prepare(data, hyper, set)?;
    let (sampler, rd, fv, v_x0) = (su.sampler, su.rd, su.fv, su.v_x0);
    let pi_v = optimize_pi_v_bound(&rd, &crate::drift::default_d_grid(), None)?;

    let mut best: Option<(f64, RosenthalDrift, DriftParams, Plan)> = None;
    let mut first_err = None;
    for &d in &set.d_grid {
        let attempt = (|| -> Result<(RosenthalDrift, DriftParams, Plan)> {
            let d_r = su.d_r(d);
            let lb = su.ln_beta(data, hyper, d_r)?;
            let bt = lb.exp();
            if !(bt > 0.0) {
                return Err(Error::numeric(format!("minorization constant underflows: ln beta_tilde_R = {lb} at d_R = {d_r}")));
            }
            let rdm = rd.with_minorization(d_r, bt)?;
            let dp = rosenthal_to_baxendale(&rdm, d)?;
            let mut problem = PlanProblem::new(dp, OperatorClass::General, fv, v_x0);
            problem.pi_v = Some(pi_v);
            let grids = PlanGrids::above_rho(&problem, set.n_gamma, set.a_grid.clone())?;
            let plan = optimize_plan(&problem, set.eps, set.alpha, set.mode, &grids)?;
            Ok((rdm, dp, plan))
        })();
        match attempt {
            Ok((rdm, dp, plan)) => {
                if best.as_ref().is_none_or(|b| plan.total_cost < b.3.total_cost) {
                    best = Some((d, rdm, dp, plan));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let (d, rdm, dp, plan) = match (best, first_err) {
        (Some(b), _) => b,
        (None, Some(e)) => return Err(e),
        (None, None) => return Err(Error::validation("empty d grid")),
    };
    let bt = rdm.beta_tilde_r.expect("attached");
    let mut checks = su.checks;
    checks.push(check("beta_tilde_R in (0, 1]", bt > 0.0 && bt <= 1.0, format!("beta_tilde_R = {bt}")));
    checks.push(check(
        "d_R > 2 K_R / (1 - lambda_R)",
        true,
        format!("d_R = {}, bound = {}", rdm.d_r.expect("attached"), 2.0 * rdm.k_r / (1.0 - rdm.lambda_r)),
    ));
    Ok(HremPlanReport {
        target: set.target,
        sampler,
        class: OperatorClass::General,
        lambda_r: rd.lambda_r,
        phi: su.phi,
        c3: su.c3,
        rho1: su.rho1,
        rosenthal: rdm,
        d,
        drift: dp,
        fv_bound: fv,
        pi_v,
        v_x0,
        start: su.start,
        checks,
        plan,
    })
}
