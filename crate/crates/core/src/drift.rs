//! Drift and minorization conditions and the bounds they imply.
//!
//! [`DriftParams`] carries the constants of a drift condition towards a small
//! set `C`: `P V <= lambda V` off `C`, `P V <= K` on `C`, a minorization
//! `P(x, .) >= beta_tilde nu(.)` on `C`, and the aperiodicity constant `beta`.
//! The drift function `V` itself lives with the chain that supplies these
//! constants; only its infimum `v_floor` enters the bounds here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants of a Baxendale-type drift and minorization condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    /// Minorization constant on the small set.
    pub beta_tilde: f64,
    /// Aperiodicity constant, `beta_tilde * nu(C) >= beta`.
    pub beta: f64,
    /// Contraction factor off the small set.
    pub lambda: f64,
    /// Ceiling of `PV` on the small set.
    pub k: f64,
    /// `inf V`.
    pub v_floor: f64,
    /// Mass the minorizing measure puts on the small set.
    pub nu_on_c: f64,
    /// Upper bound on the stationary mass of the small set.
    pub pi_c: f64,
    /// Optional bound on `nu(C) + int_{C^c} V dnu`.
    pub k_tilde: Option<f64>,
}

impl DriftParams {
    /// Builds and validates a parameter set with `v_floor = nu(C) = pi(C) = 1`.
    pub fn new(beta_tilde: f64, beta: f64, lambda: f64, k: f64) -> Result<Self> {
        let dp = DriftParams {
            beta_tilde,
            beta,
            lambda,
            k,
            v_floor: 1.0,
            nu_on_c: 1.0,
            pi_c: 1.0,
            k_tilde: None,
        };
        dp.validate()?;
        Ok(dp)
    }

    pub fn with_v_floor(mut self, v_floor: f64) -> Result<Self> {
        self.v_floor = v_floor;
        self.validate()?;
        Ok(self)
    }

    pub fn with_nu_on_c(mut self, nu_on_c: f64) -> Result<Self> {
        self.nu_on_c = nu_on_c;
        self.validate()?;
        Ok(self)
    }

    pub fn with_pi_c(mut self, pi_c: f64) -> Result<Self> {
        self.pi_c = pi_c;
        self.validate()?;
        Ok(self)
    }

    pub fn with_k_tilde(mut self, k_tilde: f64) -> Result<Self> {
        self.k_tilde = Some(k_tilde);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.beta_tilde, self.beta, self.lambda, self.k, self.v_floor, self.nu_on_c, self.pi_c];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain(format!("drift parameters must be finite: {self:?}")));
        }
        if !(self.beta > 0.0 && self.beta <= self.beta_tilde && self.beta_tilde <= 1.0) {
            return Err(Error::domain(format!(
                "need 0 < beta <= beta_tilde <= 1, got beta={}, beta_tilde={}",
                self.beta, self.beta_tilde
            )));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::domain(format!("need 0 < lambda < 1, got {}", self.lambda)));
        }
        if self.k < 1.0 {
            return Err(Error::domain(format!("need K >= 1, got {}", self.k)));
        }
        if self.k <= self.lambda {
            return Err(Error::domain(format!("need K > lambda, got K={}, lambda={}", self.k, self.lambda)));
        }
        if self.v_floor < 1.0 {
            return Err(Error::domain(format!("need v_floor >= 1, got {}", self.v_floor)));
        }
        if !(self.nu_on_c > 0.0 && self.nu_on_c <= 1.0) {
            return Err(Error::domain(format!("need nu(C) in (0, 1], got {}", self.nu_on_c)));
        }
        if !(self.pi_c > 0.0 && self.pi_c <= 1.0) {
            return Err(Error::domain(format!("need pi(C) in (0, 1], got {}", self.pi_c)));
        }
        if let Some(kt) = self.k_tilde {
            if !(kt.is_finite() && kt >= 1.0) {
                return Err(Error::domain(format!("need K_tilde >= 1, got {kt}")));
            }
        }
        Ok(())
    }

    /// `beta_tilde = 1`: the small set is an atom.
    pub fn is_atomic(&self) -> bool {
        self.beta_tilde >= 1.0
    }
}

/// Drift condition for `V^{1/r}`, obtained from the one for `V` by Jensen.
pub fn power_transform(dp: &DriftParams, r: f64) -> Result<DriftParams> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::domain(format!("power transform needs r >= 1, got {r}")));
    }
    if r == 1.0 {
        return Ok(*dp);
    }
    let out = DriftParams {
        lambda: dp.lambda.powf(1.0 / r),
        k: dp.k.powf(1.0 / r),
        v_floor: dp.v_floor.powf(1.0 / r),
        k_tilde: None,
        ..*dp
    };
    out.validate()?;
    Ok(out)
}

/// Bound on `pi V` obtained by integrating the drift inequality.
pub fn pi_v_bound(dp: &DriftParams) -> f64 {
    let b = dp.pi_c * (dp.k - dp.lambda) / (1.0 - dp.lambda);
    if b < 1.0 {
        log::warn!("pi V bound {b} is below 1 although V >= 1; check pi(C) and K");
    }
    b
}

/// `K_{p,lambda} = (K^{1/p} - lambda^{1/p}) / (1 - lambda^{1/p})`.
pub fn k_p_lambda(dp: &DriftParams, p: f64) -> f64 {
    let lp = dp.lambda.powf(1.0 / p);
    (dp.k.powf(1.0 / p) - lp) / (1.0 - lp)
}

/// Bound on `|f_c^p|_V` for the centred function `f - pi f`, given
/// `cfv = |f^p|_V = sup |f|^p / V`.
///
/// For `p = 2` this is `(cfv^{1/2} + pi(C) K_{2,lambda} / v_floor^{1/2})^2`;
/// for `p > 2` the outer exponent is `p`.
pub fn centered_fv_bound(cfv: f64, dp: &DriftParams, p: f64) -> Result<f64> {
    if !(cfv >= 0.0) || !cfv.is_finite() {
        return Err(Error::domain(format!("|f^p|_V must be a finite nonnegative number, got {cfv}")));
    }
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::domain(format!("need p >= 2, got {p}")));
    }
    let inner = cfv.powf(1.0 / p) + dp.pi_c * k_p_lambda(dp, p) / dp.v_floor.powf(1.0 / p);
    Ok(inner.powf(p))
}

/// Rosenthal-type drift: `P V_R <= lambda_R V_R + K_R` everywhere, with
/// minorization constant `beta_tilde_R` on `{V_R <= d_R}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RosenthalDrift {
    pub lambda_r: f64,
    pub k_r: f64,
    pub d_r: Option<f64>,
    pub beta_tilde_r: Option<f64>,
}

impl RosenthalDrift {
    pub fn new(lambda_r: f64, k_r: f64) -> Result<Self> {
        if !(lambda_r > 0.0 && lambda_r < 1.0) {
            return Err(Error::domain(format!("need 0 < lambda_R < 1, got {lambda_r}")));
        }
        if !(k_r > 0.0) || !k_r.is_finite() {
            return Err(Error::domain(format!("need K_R > 0, got {k_r}")));
        }
        Ok(RosenthalDrift { lambda_r, k_r, d_r: None, beta_tilde_r: None })
    }

    /// Attaches the small-set level and its minorization constant.
    pub fn with_minorization(mut self, d_r: f64, beta_tilde_r: f64) -> Result<Self> {
        if !(d_r > 2.0 * self.k_r / (1.0 - self.lambda_r)) {
            return Err(Error::validation(format!(
                "small-set level d_R = {d_r} must exceed 2 K_R / (1 - lambda_R) = {}",
                2.0 * self.k_r / (1.0 - self.lambda_r)
            )));
        }
        if !(beta_tilde_r > 0.0 && beta_tilde_r <= 1.0) {
            return Err(Error::domain(format!("need beta_tilde_R in (0, 1], got {beta_tilde_r}")));
        }
        self.d_r = Some(d_r);
        self.beta_tilde_r = Some(beta_tilde_r);
        Ok(self)
    }

    /// The `V_R` level of the small set `C(d)` used by the conversion with
    /// parameter `d`; `d_R` must be at least this for the minorization to
    /// cover `C(d)`.
    pub fn small_set_level(&self, d: f64) -> f64 {
        (d + 1.0) * (d + 1.0) * (self.k_r + 1.0 - self.lambda_r) / (d * (1.0 - self.lambda_r)) - 1.0
    }

    pub fn to_roberts_tweedie(&self, d: f64) -> Result<RobertsTweedieDrift> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::domain(format!("conversion parameter d must be positive, got {d}")));
        }
        let lambda_rt = (d + self.lambda_r) / (d + 1.0);
        let k_rt = self.k_r + 1.0 - self.lambda_r;
        Ok(RobertsTweedieDrift {
            lambda_rt,
            k_rt,
            d_rt: (d + 1.0) * k_rt / (d * (1.0 - lambda_rt)),
            beta_tilde_rt: self.beta_tilde_r,
        })
    }
}

/// Roberts–Tweedie-type drift: `P V_RT <= lambda_RT V_RT + K_RT 1_C` with
/// `C = {V_RT <= d_RT}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobertsTweedieDrift {
    pub lambda_rt: f64,
    pub k_rt: f64,
    pub d_rt: f64,
    pub beta_tilde_rt: Option<f64>,
}

impl RobertsTweedieDrift {
    /// Baxendale-type constants via `K = K_RT + lambda_RT d_RT`.
    pub fn to_baxendale(&self) -> Result<DriftParams> {
        let bt = self.beta_tilde_rt.ok_or_else(|| {
            Error::validation("Baxendale conversion needs the minorization constant beta_tilde")
        })?;
        DriftParams::new(bt, bt, self.lambda_rt, self.k_rt + self.lambda_rt * self.d_rt)
    }
}

/// Baxendale-type constants for `V = V_R + 1` from a Rosenthal-type drift.
pub fn rosenthal_to_baxendale(rd: &RosenthalDrift, d: f64) -> Result<DriftParams> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::domain(format!("conversion parameter d must be positive, got {d}")));
    }
    let bt = rd
        .beta_tilde_r
        .ok_or_else(|| Error::validation("Baxendale conversion needs the minorization constant beta_tilde_R"))?;
    let (lr, kr) = (rd.lambda_r, rd.k_r);
    let lambda = (d + lr) / (d + 1.0);
    let k = (kr + 1.0 - lr) * (d * d + 2.0 * d + lr) / (d * (1.0 - lr));
    DriftParams::new(bt, bt, lambda, k)
}

/// Logarithmic grid `10^-3 .. 10^3` with 121 points.
pub fn default_d_grid() -> Vec<f64> {
    (0..121).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 120.0)).collect()
}

/// Best available bound on `pi V` for `V = V_R + 1`: the minimum over the
/// grid of `pi(C_RT(d)) K_RT / (1 - lambda_RT(d))` and `K_R/(1-lambda_R) + 1`.
///
/// `pi_c_rt` bounds `pi(C_RT(d))`; `None` means the trivial bound 1.
pub fn optimize_pi_v_bound(
    rd: &RosenthalDrift,
    d_grid: &[f64],
    pi_c_rt: Option<&dyn Fn(f64) -> f64>,
) -> Result<f64> {
    if d_grid.is_empty() {
        return Err(Error::domain("d grid for the pi V bound is empty"));
    }
    let fallback = rd.k_r / (1.0 - rd.lambda_r) + 1.0;
    let mut best = fallback;
    for &d in d_grid {
        let rt = rd.to_roberts_tweedie(d)?;
        let pc = pi_c_rt.map_or(1.0, |f| f(d));
        let v = pc * rt.k_rt / (1.0 - rt.lambda_rt);
        if v < best {
            best = v;
        }
    }
    Ok(best)
}
