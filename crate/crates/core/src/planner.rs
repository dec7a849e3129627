//! MSE bounds and `(eps, alpha)`-approximation plans.
//!
//! A plan fixes the burn-in `t`, the averaged length `n` and the number of
//! independent runs `m` (odd; `m = 1` is a single walk) such that the
//! estimator is within `eps` of the target with probability at least
//! `1 - alpha`. All constants are carried in natural-log form alongside their
//! direct values so that confidence levels like `alpha = 1e-5` and very poor
//! rate certificates never overflow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::{centered_fv_bound, pi_v_bound, power_transform, DriftParams};
use crate::error::{Error, Result};
use crate::numeric::{ln_add, softplus};
use crate::ratebounds::{rate_bounds_on_grid, OperatorClass, RateBound};

/// Median confidence level used when none is given.
pub const DEFAULT_A: f64 = 0.11969;

/// Constants entering the MSE bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseInputs {
    /// `|f_c^p|_V^{2/p}`.
    pub fc_norm: f64,
    /// Bound on (or exact value of) `pi V`.
    pub pi_v: f64,
    /// `min{pi_0 V, ||pi_0 - pi||_V}` for a random start.
    pub init_gap: f64,
    /// Certificate for `V`.
    pub rate_v: RateBound,
    /// Certificate for `V^{1/r}`.
    pub rate_vr: RateBound,
    pub p: f64,
    pub r: f64,
}

impl MseInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("fc_norm", self.fc_norm), ("pi_v", self.pi_v)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.init_gap >= 0.0) || !self.init_gap.is_finite() {
            return Err(Error::domain(format!("init_gap must be nonnegative, got {}", self.init_gap)));
        }
        for rb in [&self.rate_v, &self.rate_vr] {
            if !(rb.gamma > 0.0 && rb.gamma < 1.0) || !rb.ln_m.is_finite() {
                return Err(Error::domain(format!("invalid rate certificate {rb:?}")));
            }
        }
        if !(self.p >= 2.0) {
            return Err(Error::domain(format!("need p >= 2, got {}", self.p)));
        }
        let lo = self.p / (self.p - 1.0);
        if !(self.r >= lo - 1e-12 && self.r <= self.p + 1e-12) {
            return Err(Error::domain(format!("need r in [p/(p-1), p] = [{lo}, {}], got {}", self.p, self.r)));
        }
        Ok(())
    }

    /// `ln(1 + 2 M_r gamma_r / (1 - gamma_r))`.
    pub fn ln_factor(&self) -> f64 {
        let g = self.rate_vr.gamma;
        softplus(std::f64::consts::LN_2 + self.rate_vr.ln_m + g.ln() - (-g).ln_1p())
    }

    pub fn factor(&self) -> f64 {
        let g = self.rate_vr.gamma;
        1.0 + 2.0 * self.rate_vr.m * g / (1.0 - g)
    }
}

/// Initial distribution of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Start {
    Stationary,
    /// Random start with `min{pi_0 V, ||pi_0 - pi||_V}` taken from `init_gap`.
    Distribution,
    /// Deterministic start at `x` with `V(x) = v_x0`, discarding `burn_in` steps.
    Point { v_x0: f64, burn_in: u128 },
}

/// Bound on the mean square error of the average of `n` steps.
pub fn mse_bound(inp: &MseInputs, n: u128, start: Start) -> Result<f64> {
    inp.validate()?;
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let nf = n as f64;
    let (m, g) = (inp.rate_v.m, inp.rate_v.gamma);
    let tail = match start {
        Start::Stationary => 0.0,
        Start::Distribution => m * inp.init_gap,
        Start::Point { v_x0, burn_in: 0 } => m * v_x0,
        Start::Point { v_x0, burn_in } => m * m * g.powf(burn_in as f64) * v_x0,
    };
    Ok(inp.fc_norm / nf * inp.factor() * (inp.pi_v + tail / (nf * (1.0 - g))))
}

/// Bound on the asymptotic variance; for reversible chains also the
/// spectral bound `(1 + rho)/(1 - rho) pi V |f_c^2|_V`, whichever is smaller.
pub fn asymptotic_var_bound(inp: &MseInputs, reversible: bool, rho: Option<f64>) -> Result<f64> {
    inp.validate()?;
    let general = inp.pi_v * inp.fc_norm * inp.factor();
    if !reversible {
        return Ok(general);
    }
    let rho = rho.ok_or_else(|| Error::domain("reversible bound needs rho"))?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::domain(format!("need rho in (0, 1), got {rho}")));
    }
    Ok(general.min((1.0 + rho) / (1.0 - rho) * inp.pi_v * inp.fc_norm))
}

/// Intermediate constants of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanMeta {
    pub eps: f64,
    pub alpha: f64,
    /// Confidence level of each run in a median plan.
    pub a: Option<f64>,
    pub gamma: f64,
    pub gamma_r: f64,
    pub m_v: f64,
    pub m_vr: f64,
    pub ln_m_v: f64,
    pub ln_m_vr: f64,
    pub pi_v: f64,
    pub fc_norm: f64,
    pub b: f64,
    pub ln_b: f64,
    /// `c_tilde` for a deterministic start, `c` for a random start.
    pub c: f64,
    pub ln_c: f64,
    pub ln_n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    /// Burn-in steps.
    pub t: u128,
    /// Averaged steps per run.
    pub n: u128,
    /// Number of runs (odd).
    pub m: u64,
    /// `m (t + n)`.
    pub total_cost: u128,
    pub meta: PlanMeta,
}

/// `b` and `c` (or `c_tilde`) in natural-log form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogConstants {
    pub ln_b: f64,
    pub ln_c: f64,
}

fn check_eps_alpha(eps: f64, alpha: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::validation(format!("eps must be positive, got {eps}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `(ln b, ln c_tilde)` for a deterministic start with `V(x0) = v_x0`, or
/// `(ln b, ln c)` for a random start when `v_x0` is `None`.
pub fn log_constants(eps: f64, alpha: f64, inp: &MseInputs, v_x0: Option<f64>) -> LogConstants {
    let ln_scale = inp.fc_norm.ln() + inp.ln_factor() - 2.0 * eps.ln() - alpha.ln();
    let ln_b = inp.pi_v.ln() + ln_scale;
    let g = inp.rate_v.gamma;
    let ln_c = match v_x0 {
        Some(v) => 2.0 * inp.rate_v.ln_m + v.ln() + ln_scale - (-g).ln_1p(),
        None => inp.rate_v.ln_m + inp.init_gap.ln() + ln_scale - (-g).ln_1p(),
    };
    LogConstants { ln_b, ln_c }
}

/// Direct evaluation of `(b, c)`; entries may overflow to `inf`.
pub fn direct_constants(eps: f64, alpha: f64, inp: &MseInputs, v_x0: Option<f64>) -> (f64, f64) {
    let scale = inp.fc_norm * inp.factor() / (eps * eps * alpha);
    let g = inp.rate_v.gamma;
    let m = inp.rate_v.m;
    let c = match v_x0 {
        Some(v) => m * m * v * scale / (1.0 - g),
        None => m * inp.init_gap * scale / (1.0 - g),
    };
    (inp.pi_v * scale, c)
}

/// `ln((b + sqrt(b^2 + 4c)) / 2)` from logs.
fn ln_n_of(ln_b: f64, ln_c: f64) -> f64 {
    if ln_c == f64::NEG_INFINITY {
        return ln_b;
    }
    let y = std::f64::consts::LN_2 * 2.0 + ln_c - 2.0 * ln_b;
    ln_b + softplus(0.5 * softplus(y)) - std::f64::consts::LN_2
}

fn ceil_count(real: f64, ln_real: f64, what: &str) -> Result<u128> {
    if real.is_finite() {
        let c = real.ceil();
        if c < 3.4e38 {
            return Ok(c.max(0.0) as u128);
        }
    }
    Err(Error::numeric(format!("{what} = exp({ln_real:.3}) exceeds the 128-bit count range")))
}

fn optimal_burn_in(ln_b: f64, ln_c_tilde: f64, gamma: f64) -> f64 {
    let lg = gamma.ln();
    let ln_abs_lg = (-lg).ln();
    let x = ln_b + ln_abs_lg;
    let ln_num = ln_add(std::f64::consts::LN_2, 0.5 * ln_add(4f64.ln(), 2.0 * x));
    let arg = ln_num - ln_c_tilde - 2.0 * ln_abs_lg;
    (arg / lg).ceil().max(0.0)
}

fn build_meta(eps: f64, alpha: f64, inp: &MseInputs, b: f64, c: f64, lc: LogConstants, ln_n: f64) -> PlanMeta {
    PlanMeta {
        eps,
        alpha,
        a: None,
        gamma: inp.rate_v.gamma,
        gamma_r: inp.rate_vr.gamma,
        m_v: inp.rate_v.m,
        m_vr: inp.rate_vr.m,
        ln_m_v: inp.rate_v.ln_m,
        ln_m_vr: inp.rate_vr.ln_m,
        pi_v: inp.pi_v,
        fc_norm: inp.fc_norm,
        b,
        ln_b: lc.ln_b,
        c,
        ln_c: lc.ln_c,
        ln_n,
    }
}

/// Single-walk plan.
///
/// With `v_x0 = Some(V(x0))` the chain starts at a point and the burn-in is
/// chosen to minimise `t + n`; with `None` it starts from a distribution
/// with gap `inp.init_gap` and `t = 0`.
pub fn plan_one_walk(eps: f64, alpha: f64, inp: &MseInputs, v_x0: Option<f64>) -> Result<Plan> {
    check_eps_alpha(eps, alpha)?;
    inp.validate()?;
    if let Some(v) = v_x0 {
        if !(v >= 1.0) || !v.is_finite() {
            return Err(Error::domain(format!("V(x0) must be >= 1, got {v}")));
        }
    }
    let lc = log_constants(eps, alpha, inp, v_x0);
    let (b, c0) = direct_constants(eps, alpha, inp, v_x0);
    let g = inp.rate_v.gamma;
    let t = match v_x0 {
        Some(_) => optimal_burn_in(lc.ln_b, lc.ln_c, g),
        None => 0.0,
    };
    let ln_ct = lc.ln_c + t * g.ln();
    let ct = c0 * g.powf(t);
    let ln_n = ln_n_of(lc.ln_b, ln_ct);
    let n_real = if b.is_finite() && ct.is_finite() && b * b < f64::MAX {
        (b + (b * b + 4.0 * ct).sqrt()) / 2.0
    } else {
        ln_n.exp()
    };
    let n = ceil_count(n_real, ln_n, "n")?.max(1);
    let t = ceil_count(t, t.ln(), "t")?;
    Ok(Plan {
        t,
        n,
        m: 1,
        total_cost: t.checked_add(n).ok_or_else(|| Error::numeric("total cost overflows"))?,
        meta: build_meta(eps, alpha, inp, b, c0, lc, ln_n),
    })
}

/// Smallest odd `m` with `m >= 2 ln(2 alpha) / ln(4 a (1 - a))`.
pub fn median_m(alpha: f64, a: f64) -> Result<u64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::domain(format!("median needs alpha in (0, 1/2), got {alpha}")));
    }
    if !(a > 0.0 && a < 0.5) {
        return Err(Error::domain(format!("median needs a in (0, 1/2), got {a}")));
    }
    let bound = 2.0 * (2.0 * alpha).ln() / (4.0 * a * (1.0 - a)).ln();
    if !bound.is_finite() || bound > 1e18 {
        return Err(Error::numeric(format!("median run count {bound} out of range")));
    }
    let mut m = bound.ceil().max(1.0) as u64;
    if m.is_multiple_of(2) {
        m += 1;
    }
    Ok(m)
}

/// `0.01, 0.015, ..., 0.49`.
pub fn default_a_grid() -> Vec<f64> {
    (0..=96).map(|i| 0.01 + 0.005 * i as f64).collect()
}

/// Median-of-averages plan: `m` independent runs of length `t + n`, each an
/// `(eps, a)`-approximation.
///
/// `a = None` uses [`DEFAULT_A`]; `a_grid` (if given) replaces it by the
/// cheapest grid value. When `a <= alpha` a single walk already suffices.
pub fn plan_median(
    eps: f64,
    alpha: f64,
    a: Option<f64>,
    a_grid: Option<&[f64]>,
    inp: &MseInputs,
    v_x0: Option<f64>,
) -> Result<Plan> {
    check_eps_alpha(eps, alpha)?;
    let one = |a: f64| -> Result<Plan> {
        let mut plan = plan_one_walk(eps, a, inp, v_x0)?;
        plan.m = if a <= alpha { 1 } else { median_m(alpha, a)? };
        plan.total_cost = checked_cost(plan.m, plan.t, plan.n)?;
        plan.meta.alpha = alpha;
        plan.meta.a = Some(a);
        Ok(plan)
    };
    match a_grid {
        None => one(a.unwrap_or(DEFAULT_A)),
        Some(grid) => {
            let mut best: Option<Plan> = None;
            for &ag in grid {
                let p = one(ag)?;
                if best.as_ref().is_none_or(|b| p.total_cost < b.total_cost) {
                    best = Some(p);
                }
            }
            best.ok_or_else(|| Error::domain("empty a grid"))
        }
    }
}

fn checked_cost(m: u64, t: u128, n: u128) -> Result<u128> {
    t.checked_add(n)
        .and_then(|s| s.checked_mul(m as u128))
        .ok_or_else(|| Error::numeric("total cost overflows"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMode {
    OneWalk,
    Median,
}

/// What is being estimated and from where: enough to build [`MseInputs`]
/// for any `(gamma, gamma_r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanProblem {
    pub drift: DriftParams,
    pub class: OperatorClass,
    /// `|f^p|_V`.
    pub cfv: f64,
    pub p: f64,
    pub r: f64,
    /// `V(x0)` for a point start; `None` for a random start.
    pub v_x0: Option<f64>,
    pub init_gap: f64,
    /// Replaces the drift-derived `pi V` bound when given.
    pub pi_v: Option<f64>,
    /// Replaces the drift-derived `|f_c^p|_V^{2/p}` bound when given.
    pub fc_norm: Option<f64>,
}

impl PlanProblem {
    /// `p = r = 2` with a point start.
    pub fn new(drift: DriftParams, class: OperatorClass, cfv: f64, v_x0: f64) -> Self {
        PlanProblem {
            drift,
            class,
            cfv,
            p: 2.0,
            r: 2.0,
            v_x0: Some(v_x0),
            init_gap: v_x0,
            pi_v: None,
            fc_norm: None,
        }
    }

    pub fn pi_v(&self) -> f64 {
        self.pi_v.unwrap_or_else(|| pi_v_bound(&self.drift))
    }

    pub fn fc_norm(&self) -> Result<f64> {
        match self.fc_norm {
            Some(v) => Ok(v),
            None => Ok(centered_fv_bound(self.cfv, &self.drift, self.p)?.powf(2.0 / self.p)),
        }
    }

    pub fn inputs(&self, gamma: f64, gamma_r: f64) -> Result<MseInputs> {
        let rate_v = rate_bounds_on_grid(&self.drift, self.class, &[gamma])?.remove(0)?;
        let dr = power_transform(&self.drift, self.r)?;
        let rate_vr = rate_bounds_on_grid(&dr, self.class, &[gamma_r])?.remove(0)?;
        self.inputs_from(rate_v, rate_vr)
    }

    fn inputs_from(&self, rate_v: RateBound, rate_vr: RateBound) -> Result<MseInputs> {
        let inp = MseInputs {
            fc_norm: self.fc_norm()?,
            pi_v: self.pi_v(),
            init_gap: self.init_gap,
            rate_v,
            rate_vr,
            p: self.p,
            r: self.r,
        };
        inp.validate()?;
        Ok(inp)
    }
}

/// Grids searched by [`optimize_plan`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanGrids {
    pub gamma: Vec<f64>,
    pub gamma_r: Vec<f64>,
    /// Median confidence levels; `None` keeps `a` fixed.
    pub a: Option<Vec<f64>>,
}

impl PlanGrids {
    /// `n` equally spaced points strictly inside `(lo, hi)`.
    pub fn linspace_open(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (1..=n).map(|i| lo + (hi - lo) * i as f64 / (n + 1) as f64).collect()
    }

    /// `n` points in `(rho, 1)` for each rate, where `rho` is the problem's
    /// own convergence rate bound (and that of the `V^{1/r}` drift).
    pub fn above_rho(problem: &PlanProblem, n: usize, a: Option<Vec<f64>>) -> Result<Self> {
        let rho = crate::ratebounds::rho(&problem.drift, problem.class)?;
        let rho_r = crate::ratebounds::rho(&power_transform(&problem.drift, problem.r)?, problem.class)?;
        Ok(PlanGrids { gamma: Self::linspace_open(rho, 1.0, n), gamma_r: Self::linspace_open(rho_r, 1.0, n), a })
    }
}

fn plan_for(problem: &PlanProblem, eps: f64, alpha: f64, mode: PlanMode, a_grid: Option<&[f64]>, inp: &MseInputs) -> Result<Plan> {
    match mode {
        PlanMode::OneWalk => plan_one_walk(eps, alpha, inp, problem.v_x0),
        PlanMode::Median => plan_median(eps, alpha, None, a_grid, inp, problem.v_x0),
    }
}

fn plan_order(p: &Plan) -> (u128, f64, f64, f64) {
    (p.total_cost, p.meta.gamma, p.meta.gamma_r, p.meta.a.unwrap_or(0.0))
}

fn better(a: &Plan, b: &Plan) -> bool {
    let (ka, kb) = (plan_order(a), plan_order(b));
    ka.0 < kb.0
        || (ka.0 == kb.0 && (ka.1, ka.2, ka.3).partial_cmp(&(kb.1, kb.2, kb.3)) == Some(std::cmp::Ordering::Less))
}

/// Cheapest plan over the `gamma x gamma_r` grid. Grid points with
/// `gamma <= rho` are skipped; ties go to smaller `gamma`, then `gamma_r`.
pub fn optimize_plan(problem: &PlanProblem, eps: f64, alpha: f64, mode: PlanMode, grids: &PlanGrids) -> Result<Plan> {
    check_eps_alpha(eps, alpha)?;
    if grids.gamma.is_empty() || grids.gamma_r.is_empty() {
        return Err(Error::domain("gamma and gamma_r grids must be nonempty"));
    }
    let rates_v: Vec<RateBound> = rate_bounds_on_grid(&problem.drift, problem.class, &grids.gamma)?
        .into_iter()
        .filter_map(|r| r.ok())
        .collect();
    let dr = power_transform(&problem.drift, problem.r)?;
    let rates_vr: Vec<RateBound> = rate_bounds_on_grid(&dr, problem.class, &grids.gamma_r)?
        .into_iter()
        .filter_map(|r| r.ok())
        .collect();
    if rates_v.is_empty() || rates_vr.is_empty() {
        let rho = crate::ratebounds::rho(&problem.drift, problem.class)?;
        let rho_r = crate::ratebounds::rho(&dr, problem.class)?;
        return Err(Error::domain(format!(
            "no feasible grid point: need gamma > rho = {rho} and gamma_r > rho_r = {rho_r}"
        )));
    }
    let pairs: Vec<(usize, usize)> =
        (0..rates_v.len()).flat_map(|i| (0..rates_vr.len()).map(move |j| (i, j))).collect();
    let a_grid = grids.a.as_deref();
    let plans: Vec<Result<Plan>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let inp = problem.inputs_from(rates_v[i], rates_vr[j])?;
            plan_for(problem, eps, alpha, mode, a_grid, &inp)
        })
        .collect();
    let mut best: Option<Plan> = None;
    let mut first_err = None;
    for p in plans {
        match p {
            Ok(p) => {
                if best.as_ref().is_none_or(|b| better(&p, b)) {
                    best = Some(p);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::domain("no plan could be computed on the grid")),
    }
}

/// [`optimize_plan`] over a family of problems (e.g. a grid of small-set
/// sizes). Returns the index of the winning problem with its plan.
pub fn optimize_plan_over(
    problems: &[PlanProblem],
    eps: f64,
    alpha: f64,
    mode: PlanMode,
    grids: &PlanGrids,
) -> Result<(usize, Plan)> {
    let mut best: Option<(usize, Plan)> = None;
    let mut first_err = None;
    for (i, pr) in problems.iter().enumerate() {
        match optimize_plan(pr, eps, alpha, mode, grids) {
            Ok(p) => {
                if best.as_ref().is_none_or(|(_, b)| p.total_cost < b.total_cost) {
                    best = Some((i, p));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::domain("empty problem family")),
    }
}
