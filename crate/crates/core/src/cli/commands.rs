use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::{Context, EXIT_VERIFY_FAILED};
use crate::adaptive::{
    inhomogeneous_tv_bound, policy_inhomogeneous, policy_trap, state_one_frequencies, trap_stationary_one,
    tv_to_uniform,
};
use crate::chains::finite::{five_state, two_state_control};
use crate::chains::hrem::{
    block_gibbs_step, fixed_scan_step, synthetic_balanced, HremData, HremHyper, HremState, SYNTHETIC_BLOCK_LAMBDA_R,
    SYNTHETIC_BLOCK_PHI,
};
use crate::chains::hrem_bounds::{
    hrem_minorization_scan, hrem_plan, sampler_for, BlockPhi, Check, HremPlanSettings, HremSampler, HremTarget,
};
use crate::chains::normals::{cn_drift, cn_plan_problem};
use crate::chains::{ContractingNormals, FiniteChain, SplitMinorization};
use crate::drift::{pi_v_bound, power_transform, DriftParams};
use crate::error::{Error, Result};
use crate::planner::{
    optimize_plan, plan_median, plan_one_walk, Plan, PlanGrids, PlanMode, PlanProblem, DEFAULT_A,
};
use crate::ratebounds::{rate_bounds_on_grid, rho, OperatorClass, RateBound};
use crate::regen::{batch_means_var, stream_walk, TraceState, WalkSummary, WalkWindow};
use crate::seeds::stream_rng;
use crate::verify::{run_criterion, VerifyOptions, CRITERIA};

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Counts beyond `u64` are written as strings.
fn count(v: u128) -> Value {
    u64::try_from(v).map_or_else(|_| json!(v.to_string()), |x| json!(x))
}

fn parse_mode(s: &str) -> Result<PlanMode> {
    match s {
        "one-walk" => Ok(PlanMode::OneWalk),
        "median" => Ok(PlanMode::Median),
        _ => Err(Error::validation(format!("unknown mode `{s}` (expected one-walk or median)"))),
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn check_lines(checks: &[Check]) -> String {
    checks
        .iter()
        .map(|c| format!("  [{}] {}: {}", if c.holds { "ok" } else { "x" }, c.name, c.detail))
        .collect::<Vec<_>>()
        .join("\n")
}

// ---------------------------------------------------------------- drift

/// Drift constants: a chain preset or explicit values.
#[derive(Debug, Args)]
pub struct DriftArgs {
    /// `contracting-normals`, or `table55` for the same chain with the
    /// `pi(C) <= 1` bounds.
    #[arg(long)]
    pub preset: Option<String>,
    /// Autoregression coefficient of the contracting-normals chain.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Small-set radius of the contracting-normals chain.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub beta_tilde: Option<f64>,
    /// Defaults to beta-tilde.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub v_floor: Option<f64>,
    #[arg(long)]
    pub nu_on_c: Option<f64>,
    #[arg(long)]
    pub pi_c: Option<f64>,
    /// general, self-adjoint or self-adjoint-positive.
    #[arg(long)]
    pub class: Option<String>,
}

fn resolve_drift(d: &DriftArgs, ctx: &Context) -> Result<(DriftParams, OperatorClass, String)> {
    let p = &ctx.params;
    let preset = p.opt("preset", d.preset.clone())?;
    let (mut dp, mut class, source) = match preset.as_deref() {
        Some(name @ ("contracting-normals" | "table55")) => {
            let theta = p.get("theta", d.theta, 0.5)?;
            let c = p.get("c", d.c, 1.6226)?;
            let (dp, class) = if name == "table55" {
                let pr = cn_plan_problem(theta, c)?;
                (pr.drift, pr.class)
            } else {
                cn_drift(theta, c)?
            };
            (dp, class, format!("{name} theta={theta} c={c}"))
        }
        Some(other) => {
            return Err(Error::validation(format!(
                "unknown preset `{other}` (expected contracting-normals or table55)"
            )))
        }
        None => {
            let bt = p.require("beta-tilde", d.beta_tilde)?;
            let beta = p.get("beta", d.beta, bt)?;
            let lambda = p.require("lambda", d.lambda)?;
            let k = p.require("k", d.k)?;
            (DriftParams::new(bt, beta, lambda, k)?, OperatorClass::General, "explicit".to_string())
        }
    };
    if let Some(v) = p.opt("v-floor", d.v_floor)? {
        dp = dp.with_v_floor(v)?;
    }
    if let Some(v) = p.opt("nu-on-c", d.nu_on_c)? {
        dp = dp.with_nu_on_c(v)?;
    }
    if let Some(v) = p.opt("pi-c", d.pi_c)? {
        dp = dp.with_pi_c(v)?;
    }
    if let Some(s) = p.opt::<String>("class", d.class.clone())? {
        class = s.parse()?;
    }
    Ok((dp, class, source))
}

fn drift_text(dp: &DriftParams, class: OperatorClass, source: &str) -> String {
    format!(
        "drift    {source}\n         beta_tilde={:.6} beta={:.6} lambda={:.6} K={:.6} pi(C)<={:.6} class={class}",
        dp.beta_tilde, dp.beta, dp.lambda, dp.k, dp.pi_c
    )
}

// ---------------------------------------------------------------- rates

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[command(flatten)]
    pub drift: DriftArgs,
    /// Comma-separated gamma values.
    #[arg(long, value_name = "LIST")]
    pub gamma: Option<String>,
    /// Grid size in (rho, 1) when --gamma is absent.
    #[arg(long)]
    pub n_gamma: Option<usize>,
    /// Power for the V^(1/r) drift.
    #[arg(long)]
    pub r: Option<f64>,
}

fn rate_cell(r: &Result<RateBound>) -> String {
    match r {
        Ok(b) if b.m.is_finite() => format!("{:>14.6e}", b.m),
        Ok(b) => format!("{:>14}", format!("e^{:.2}", b.ln_m)),
        Err(_) => format!("{:>14}", "infeasible"),
    }
}

pub fn rates(a: &RatesArgs, ctx: &mut Context) -> Result<i32> {
    let (dp, class, source) = resolve_drift(&a.drift, ctx)?;
    let r = ctx.params.get("r", a.r, 2.0)?;
    let n_gamma = ctx.params.get("n-gamma", a.n_gamma, 8)?;
    let gammas: Option<Vec<f64>> = ctx.params.list("gamma", a.gamma.clone())?;
    ctx.banner()?;

    let rho_v = rho(&dp, class)?;
    let dr = power_transform(&dp, r)?;
    let rho_r = rho(&dr, class)?;
    let gammas = gammas.unwrap_or_else(|| PlanGrids::linspace_open(rho_v, 1.0, n_gamma.max(1)));
    let rv = rate_bounds_on_grid(&dp, class, &gammas)?;
    let rr = rate_bounds_on_grid(&dr, class, &gammas)?;

    ctx.emit(
        "rates",
        json!({"source": source, "class": class, "drift": dp, "r": r, "rho": rho_v, "rho_r": rho_r,
               "pi_v_bound": pi_v_bound(&dp)}),
        &format!(
            "{}\nrho      {rho_v:.6}\nrho_{r}    {rho_r:.6}  (drift V^(1/{r}))\n\n{:>10} {:>14} {:>14}",
            drift_text(&dp, class, &source),
            "gamma",
            "M(gamma)",
            format!("M_{r}(gamma)")
        ),
    )?;
    for (i, &g) in gammas.iter().enumerate() {
        let cell = |res: &Result<RateBound>| match res {
            Ok(b) => json!({"m": b.m, "ln_m": b.ln_m, "feasible": true}),
            Err(e) => json!({"m": null, "ln_m": null, "feasible": false, "reason": e.to_string()}),
        };
        ctx.emit(
            "rate",
            json!({"gamma": g, "rho": rho_v, "rho_r": rho_r, "v": cell(&rv[i]), "v_r": cell(&rr[i])}),
            &format!("{g:>10.6} {} {}", rate_cell(&rv[i]), rate_cell(&rr[i])),
        )?;
    }
    if rv.iter().all(|x| x.is_err()) {
        return Err(Error::domain(format!("no gamma in the grid exceeds rho = {rho_v}")));
    }
    Ok(0)
}

// ---------------------------------------------------------------- plan

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub drift: DriftArgs,
    /// Row of the contracting-normals table (with --preset table55):
    /// 1 one walk at alpha 0.1, 2 one walk at alpha 1e-5, 3 median at 1e-5.
    #[arg(long)]
    pub row: Option<u32>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// one-walk or median.
    #[arg(long)]
    pub mode: Option<String>,
    /// Per-run confidence level of a median plan.
    #[arg(long)]
    pub a: Option<f64>,
    /// Search the median level over this comma-separated list.
    #[arg(long, value_name = "LIST")]
    pub a_grid: Option<String>,
    /// Fix gamma instead of searching a grid.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub gamma_r: Option<f64>,
    /// Points per rate grid when gamma is searched.
    #[arg(long)]
    pub n_gamma: Option<usize>,
    /// `|f^2|_V`.
    #[arg(long)]
    pub cfv: Option<f64>,
    /// `V(x0)` of the starting point.
    #[arg(long)]
    pub v_x0: Option<f64>,
}

fn plan_body(p: &Plan) -> Value {
    json!({"t": count(p.t), "n": count(p.n), "m": p.m, "total_cost": count(p.total_cost), "meta": p.meta})
}

fn plan_text(p: &Plan) -> String {
    let m = &p.meta;
    let a = m.a.map_or(String::new(), |a| format!("  a={a}"));
    format!(
        "plan     t={}  n={}  m={}  cost={}\n\
         inputs   eps={} alpha={}{a}  gamma={} gamma_r={}\n\
         \x20        M={:.6e} M_r={:.6e}  piV<={:.6}  |f_c^2|_V<={:.6}\n\
         \x20        b={:.6e}  c={:.6e}",
        p.t, p.n, p.m, p.total_cost, m.eps, m.alpha, m.gamma, m.gamma_r, m.m_v, m.m_vr, m.pi_v, m.fc_norm, m.b, m.c
    )
}

struct PlanChoice {
    eps: f64,
    alpha: f64,
    mode: PlanMode,
    a: Option<f64>,
    a_grid: Option<Vec<f64>>,
    gamma: Option<(f64, f64)>,
    n_gamma: usize,
}

fn make_plan(problem: &PlanProblem, ch: &PlanChoice) -> Result<Plan> {
    match ch.gamma {
        Some((g, gr)) => {
            let inp = problem.inputs(g, gr)?;
            match ch.mode {
                PlanMode::OneWalk => plan_one_walk(ch.eps, ch.alpha, &inp, problem.v_x0),
                PlanMode::Median => plan_median(ch.eps, ch.alpha, ch.a, ch.a_grid.as_deref(), &inp, problem.v_x0),
            }
        }
        None => {
            let a = ch.a_grid.clone().or_else(|| ch.a.map(|a| vec![a]));
            let grids = PlanGrids::above_rho(problem, ch.n_gamma, a)?;
            optimize_plan(problem, ch.eps, ch.alpha, ch.mode, &grids)
        }
    }
}

pub fn plan(a: &PlanArgs, ctx: &mut Context) -> Result<i32> {
    let (dp, class, source) = resolve_drift(&a.drift, ctx)?;
    let p = &ctx.params;
    let table = source.starts_with("table55");
    let row = p.opt("row", a.row)?;
    let (alpha0, mode0) = match (table, row) {
        (_, None) => (None, "one-walk"),
        (true, Some(1)) => (Some(0.1), "one-walk"),
        (true, Some(2)) => (Some(1e-5), "one-walk"),
        (true, Some(3)) => (Some(1e-5), "median"),
        (true, Some(r)) => return Err(Error::validation(format!("--row must be 1, 2 or 3, got {r}"))),
        (false, Some(_)) => return Err(Error::validation("--row needs --preset table55")),
    };
    let eps = if table { p.get("eps", a.eps, 0.1)? } else { p.require("eps", a.eps)? };
    let alpha = match alpha0.or(if table { Some(0.1) } else { None }) {
        Some(d) => p.get("alpha", a.alpha, d)?,
        None => p.require("alpha", a.alpha)?,
    };
    let mode = parse_mode(&p.get("mode", a.mode.clone(), mode0.to_string())?)?;
    let a_grid = p.list::<f64>("a-grid", a.a_grid.clone())?;
    let a_level = match mode {
        PlanMode::Median if a_grid.is_none() => Some(p.get("a", a.a, DEFAULT_A)?),
        _ => p.opt("a", a.a)?,
    };
    let (g0, gr0) = if table { (Some(0.915), Some(0.971)) } else { (None, None) };
    let gamma = match (p.opt("gamma", a.gamma.or(g0))?, p.opt("gamma-r", a.gamma_r.or(gr0))?) {
        (Some(g), Some(gr)) => Some((g, gr)),
        (None, None) => None,
        _ => return Err(Error::validation("--gamma and --gamma-r go together")),
    };
    let n_gamma = p.get("n-gamma", a.n_gamma, 24)?;
    let cfv = p.get("cfv", a.cfv, 1.0)?;
    let v_x0 = p.get("v-x0", a.v_x0, 1.0)?;
    let choice = PlanChoice { eps, alpha, mode, a: a_level, a_grid, gamma, n_gamma };
    ctx.banner()?;

    let problem = PlanProblem::new(dp, class, cfv, v_x0);
    let plan = make_plan(&problem, &choice)?;
    let rho_v = rho(&dp, class)?;
    let rho_r = rho(&power_transform(&dp, problem.r)?, class)?;
    let mut body = plan_body(&plan);
    body["source"] = json!(source);
    body["class"] = json!(class);
    body["drift"] = json!(dp);
    body["mode"] = json!(mode);
    body["rho"] = json!(rho_v);
    body["rho_r"] = json!(rho_r);
    body["cfv"] = json!(cfv);
    body["v_x0"] = json!(v_x0);
    ctx.emit(
        "plan",
        body,
        &format!(
            "{}\nrates    rho={rho_v:.6} rho_r={rho_r:.6}\n{}",
            drift_text(&dp, class, &source),
            plan_text(&plan)
        ),
    )?;
    Ok(0)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// contracting-normals, two-state or five-state.
    #[arg(long)]
    pub chain: Option<String>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Starting point: a number, or a state index or label.
    #[arg(long)]
    pub x0: Option<String>,
    /// `x` or `x2` on the real line; a comma-separated value per state on
    /// a finite chain.
    #[arg(long)]
    pub f: Option<String>,
    /// one-walk, spaced, multi-run or median.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub t: Option<u64>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub s: Option<u64>,
    /// Take (t, n, m) from a plan for this accuracy instead.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Batch size exponent for batch means.
    #[arg(long)]
    pub theta_b: Option<f64>,
    /// Refuse runs longer than this many steps unless --force.
    #[arg(long)]
    pub max_steps: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SchemeKind {
    OneWalk,
    Spaced,
    MultiRun,
    Median,
}

enum ChainSel {
    Normals(ContractingNormals, f64, bool),
    Finite(FiniteChain, usize, Vec<f64>, String),
}

fn run_walks<K>(
    kernel: &K,
    x0: &K::State,
    f: &(dyn Fn(&K::State) -> f64 + Sync),
    window: &WalkWindow,
    runs: u64,
    seed: u64,
    dump: Option<&Path>,
) -> Result<Vec<WalkSummary>>
where
    K: SplitMinorization + Sync,
    K::State: TraceState + Send + Sync,
{
    let Some(path) = dump else {
        return (0..runs)
            .into_par_iter()
            .map(|r| stream_walk(kernel, x0.clone(), window, f, &mut stream_rng(seed, r), |_, _, _| {}))
            .collect();
    };
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = vec!["run".to_string(), "index".to_string()];
    header.extend(x0.header());
    header.push("bell".into());
    w.write_record(&header).map_err(csv_err)?;
    let mut out = Vec::with_capacity(runs as usize);
    for r in 0..runs {
        let mut failed = None;
        let s = stream_walk(kernel, x0.clone(), window, f, &mut stream_rng(seed, r), |i, x, bell| {
            if failed.is_some() {
                return;
            }
            let mut rec = vec![r.to_string(), i.to_string()];
            rec.extend(x.fields());
            rec.push((bell as u8).to_string());
            if let Err(e) = w.write_record(&rec) {
                failed = Some(e);
            }
        })?;
        if let Some(e) = failed {
            return Err(csv_err(e));
        }
        out.push(s);
    }
    w.flush()?;
    Ok(out)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn simulate(a: &SimulateArgs, ctx: &mut Context) -> Result<i32> {
    let p = &ctx.params;
    let chain_name = p.get("chain", a.chain.clone(), "contracting-normals".to_string())?;
    let chain = match chain_name.as_str() {
        "contracting-normals" => {
            let theta = p.get("theta", a.theta, 0.5)?;
            let c = p.get("c", a.c, 1.6226)?;
            let x0: f64 = p
                .get("x0", a.x0.clone(), "0".to_string())?
                .parse()
                .map_err(|_| Error::validation("--x0 must be a number for contracting-normals"))?;
            let square = match p.get("f", a.f.clone(), "x".to_string())?.as_str() {
                "x" => false,
                "x2" => true,
                other => return Err(Error::validation(format!("--f must be x or x2, got `{other}`"))),
            };
            ChainSel::Normals(ContractingNormals::new(theta, c)?, x0, square)
        }
        "two-state" | "five-state" => {
            let ch = if chain_name == "two-state" { two_state_control() } else { five_state() };
            let raw = p.get("x0", a.x0.clone(), "0".to_string())?;
            let x0 = raw
                .parse::<usize>()
                .ok()
                .filter(|&i| i < ch.n_states())
                .or_else(|| ch.index_of(&raw))
                .ok_or_else(|| Error::validation(format!("--x0 `{raw}` is not a state of {chain_name}")))?;
            let f: Vec<f64> = match p.list::<f64>("f", a.f.clone())? {
                Some(v) => v,
                None => (0..ch.n_states()).map(|i| i as f64).collect(),
            };
            if f.len() != ch.n_states() {
                return Err(Error::validation(format!("--f needs {} values", ch.n_states())));
            }
            ChainSel::Finite(ch, x0, f, chain_name.clone())
        }
        other => {
            return Err(Error::validation(format!(
                "unknown chain `{other}` (expected contracting-normals, two-state or five-state)"
            )))
        }
    };
    let scheme = match p.get("scheme", a.scheme.clone(), "one-walk".to_string())?.as_str() {
        "one-walk" => SchemeKind::OneWalk,
        "spaced" => SchemeKind::Spaced,
        "multi-run" => SchemeKind::MultiRun,
        "median" => SchemeKind::Median,
        other => return Err(Error::validation(format!("unknown scheme `{other}`"))),
    };
    let theta_b = p.get("theta-b", a.theta_b, 0.5)?;
    let max_steps = p.get("max-steps", a.max_steps, 100_000_000u64)?;

    let eps = p.opt("eps", a.eps)?;
    let (t, n, m, s, plan) = if let Some(eps) = eps {
        let alpha = p.require("alpha", a.alpha)?;
        let ChainSel::Normals(k, _, square) = &chain else {
            return Err(Error::validation("planned runs are available for contracting-normals only"));
        };
        if *square {
            return Err(Error::validation("planned runs need f(x) = x, whose square V dominates"));
        }
        let mode = match scheme {
            SchemeKind::OneWalk => PlanMode::OneWalk,
            SchemeKind::Median => PlanMode::Median,
            _ => return Err(Error::validation("planned runs use the one-walk or median scheme")),
        };
        let problem = cn_plan_problem(k.theta, k.c)?;
        let choice = PlanChoice { eps, alpha, mode, a: None, a_grid: None, gamma: None, n_gamma: 24 };
        let plan = make_plan(&problem, &choice)?;
        let too_big = |v: u128| u64::try_from(v).map_err(|_| Error::validation(format!("planned length {v} exceeds u64")));
        (too_big(plan.t)?, too_big(plan.n)?, plan.m, 1, Some(plan))
    } else {
        let t = p.get("t", a.t, 0)?;
        let n = p.require("n", a.n)?;
        let m = if scheme == SchemeKind::Median { p.require("m", a.m)? } else { 1 };
        let s = if scheme == SchemeKind::Spaced { p.require("s", a.s)? } else { 1 };
        (t, n, m, s, None)
    };
    if n == 0 || m == 0 || s == 0 {
        return Err(Error::validation("n, m and s must be positive"));
    }
    if scheme == SchemeKind::Median && m % 2 == 0 {
        return Err(Error::validation("median scheme needs an odd m"));
    }
    let (runs, window) = match scheme {
        SchemeKind::OneWalk => (1, WalkWindow { burn_in: t, n, spacing: 1, theta_b }),
        SchemeKind::Spaced => (1, WalkWindow { burn_in: t, n, spacing: s, theta_b }),
        SchemeKind::MultiRun => (n, WalkWindow { burn_in: t, n: 1, spacing: 1, theta_b }),
        SchemeKind::Median => (m, WalkWindow { burn_in: t, n, spacing: 1, theta_b }),
    };
    let steps = window.steps().and_then(|w| w.checked_mul(runs));
    let dump = ctx.dump_trace.clone();
    ctx.banner()?;

    let cost = json!({"steps": steps, "runs": runs, "max_steps": max_steps, "force": ctx.force});
    let over = steps.is_none_or(|st| st > max_steps);
    if over && !ctx.force {
        ctx.emit(
            "cost",
            cost,
            &format!(
                "cost     {} steps in {runs} run(s) exceeds --max-steps {max_steps}; rerun with --force",
                steps.map_or("more than u64".to_string(), |v| v.to_string())
            ),
        )?;
        if let Some(pl) = &plan {
            ctx.emit("plan", plan_body(pl), &plan_text(pl))?;
        }
        return Err(Error::validation("step budget exceeded"));
    }
    if steps.is_none() {
        return Err(Error::validation("run length overflows u64"));
    }
    if dump.is_some() && runs > 1000 {
        return Err(Error::validation("--dump-trace is limited to 1000 runs"));
    }

    let seed = ctx.seed;
    let (summaries, exact, sigma2, label) = match &chain {
        ChainSel::Normals(k, x0, square) => {
            let f: &(dyn Fn(&f64) -> f64 + Sync) = if *square { &|x: &f64| x * x } else { &|x: &f64| *x };
            let th2 = k.theta * k.theta;
            let (exact, sigma2) =
                if *square { (1.0, 2.0 * (1.0 + th2) / (1.0 - th2)) } else { (0.0, (1.0 + k.theta) / (1.0 - k.theta)) };
            let label = format!("contracting-normals theta={} c={} f={}", k.theta, k.c, if *square { "x^2" } else { "x" });
            (run_walks(k, x0, f, &window, runs, seed, dump.as_deref())?, Some(exact), Some(sigma2), label)
        }
        ChainSel::Finite(ch, x0, fv, name) => {
            let f = |x: &usize| fv[*x];
            let pi = ch.stationary()?;
            let exact = pi.iter().zip(fv).map(|(p, v)| p * v).sum::<f64>();
            let sigma2 = ch.asymptotic_variance(fv).ok();
            (run_walks(ch, x0, &f, &window, runs, seed, dump.as_deref())?, Some(exact), sigma2, name.clone())
        }
    };

    let mut means: Vec<f64> = summaries.iter().map(|s| s.mean).collect();
    let estimate = match scheme {
        SchemeKind::Median => median(&mut means),
        _ => means.iter().sum::<f64>() / means.len() as f64,
    };
    let first = summaries[0];
    let (bm_var, rs) = match scheme {
        SchemeKind::MultiRun => (None, None),
        _ => (first.bm_var, first.regen),
    };
    let iid_var = (scheme == SchemeKind::MultiRun && runs > 1)
        .then(|| means.iter().map(|v| (v - estimate).powi(2)).sum::<f64>() / (runs - 1) as f64);
    // Median runs report the error of a single run's average.
    let samples = if scheme == SchemeKind::Median { window.n as f64 } else { (runs * window.n) as f64 };
    let var_for_se = iid_var.or(bm_var).or(rs.map(|r| r.per_step_variance()));
    let std_error = var_for_se.map(|v| (v / samples).sqrt());

    if let Some(pl) = &plan {
        ctx.emit("plan", plan_body(pl), &plan_text(pl))?;
    }
    if runs > 1 && runs <= 1000 {
        for (r, sm) in summaries.iter().enumerate() {
            ctx.emit("run", json!({"run": r, "seed_stream": r, "summary": sm}), "")?;
        }
    }
    let scheme_name = match scheme {
        SchemeKind::OneWalk => "one-walk",
        SchemeKind::Spaced => "spaced",
        SchemeKind::MultiRun => "multi-run",
        SchemeKind::Median => "median",
    };
    let bells: u64 = summaries.iter().map(|s| s.bells).sum();
    let body = json!({
        "chain": label, "scheme": scheme_name, "t": t, "n": n, "m": m, "s": s, "runs": runs,
        "steps": steps, "run_seeds": {"master": seed, "streams": [0, runs]},
        "estimate": estimate, "exact": exact, "error": exact.map(|e| estimate - e),
        "std_error": std_error, "asymptotic_var": sigma2,
        "bm_var": bm_var, "rs_var": rs.map(|r| r.per_step_variance()), "regen": rs,
        "between_run_var": iid_var, "sample_var": first.sample_var, "bells": bells,
        "trace": dump.as_ref().map(|p| p.display().to_string()),
    });
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6}"));
    let text = format!(
        "chain    {label}\nscheme   {scheme_name} t={t} n={n} m={m} s={s} runs={runs} steps={}\n\
         seeds    master {seed}, run r uses stream r\n\
         estimate {estimate:.6}  (exact {}, std error {})\n\
         variance batch means {}  regenerative {}  exact {}\n\
         tours    {} bells, {} complete tours in the first run",
        steps.unwrap_or(0),
        opt(exact),
        opt(std_error),
        opt(bm_var),
        opt(rs.map(|r| r.per_step_variance())),
        opt(sigma2),
        bells,
        rs.map_or(0, |r| r.tours),
    );
    ctx.emit("simulate", body, &text)?;
    Ok(0)
}

// ---------------------------------------------------------------- hrem

#[derive(Debug, Args)]
pub struct HremArgs {
    /// CSV with columns `group,y`.
    #[arg(long, value_name = "PATH")]
    pub data: Option<String>,
    /// Use the built-in balanced data set and prior.
    #[arg(long)]
    pub synthetic: bool,
    /// mu, lambda_theta, lambda_e or theta<i>.
    #[arg(long)]
    pub target: Option<String>,
    /// block or fixed-scan; must agree with the target.
    #[arg(long)]
    pub sampler: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub lambda_r: Option<f64>,
    /// Balanced block drift weight.
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub phi1: Option<f64>,
    #[arg(long)]
    pub phi2: Option<f64>,
    #[arg(long)]
    pub c3: Option<f64>,
    #[arg(long)]
    pub rho1: Option<f64>,
    #[arg(long)]
    pub n_gamma: Option<usize>,
    #[arg(long)]
    pub m0: Option<f64>,
    #[arg(long)]
    pub s0: Option<f64>,
    #[arg(long)]
    pub a1: Option<f64>,
    #[arg(long)]
    pub b1: Option<f64>,
    #[arg(long)]
    pub a2: Option<f64>,
    #[arg(long)]
    pub b2: Option<f64>,
    /// Also run the sampler this many sweeps from the planned start.
    #[arg(long)]
    pub sweeps: Option<u64>,
}

pub fn hrem(a: &HremArgs, ctx: &mut Context) -> Result<i32> {
    let p = &ctx.params;
    let synthetic = p.flag("synthetic", a.synthetic)?;
    let path = p.opt::<String>("data", a.data.clone())?;
    let (data, hyper, default_block) = match (path, synthetic) {
        (Some(_), true) => return Err(Error::validation("give either --data or --synthetic")),
        (None, false) => return Err(Error::validation("missing required parameter --data (or --synthetic)")),
        (None, true) => {
            let (d, h) = synthetic_balanced();
            let hyper = HremHyper {
                m0: p.get("m0", a.m0, h.m0)?,
                s0: p.get("s0", a.s0, h.s0)?,
                a1: p.get("a1", a.a1, h.a1)?,
                b1: p.get("b1", a.b1, h.b1)?,
                a2: p.get("a2", a.a2, h.a2)?,
                b2: p.get("b2", a.b2, h.b2)?,
            };
            (d, hyper, true)
        }
        (Some(path), false) => {
            let data = HremData::from_csv_path(Path::new(&path))?;
            let hyper = HremHyper {
                m0: p.require("m0", a.m0)?,
                s0: p.require("s0", a.s0)?,
                a1: p.require("a1", a.a1)?,
                b1: p.require("b1", a.b1)?,
                a2: p.require("a2", a.a2)?,
                b2: p.require("b2", a.b2)?,
            };
            (data, hyper, false)
        }
    };
    let target: HremTarget = p.get("target", a.target.clone(), "mu".to_string())?.parse()?;
    let requested = p.opt::<String>("sampler", a.sampler.clone())?.map(|s| s.parse::<HremSampler>()).transpose()?;
    let sampler = sampler_for(target, requested)?;
    let mut set = HremPlanSettings::new(target, p.get("eps", a.eps, 0.1)?, p.get("alpha", a.alpha, 0.1)?);
    set.sampler = Some(sampler);
    set.mode = parse_mode(&p.get("mode", a.mode.clone(), "one-walk".to_string())?)?;
    set.a_grid = p.opt("a", a.a)?.map(|v| vec![v]);
    let block_defaults = default_block && sampler == HremSampler::Block;
    set.lambda_r = match p.opt("lambda-r", a.lambda_r)? {
        Some(v) => Some(v),
        None if block_defaults => Some(p.get("lambda-r", None, SYNTHETIC_BLOCK_LAMBDA_R)?),
        None => None,
    };
    set.phi = match (p.opt("phi", a.phi)?, p.opt("phi1", a.phi1)?, p.opt("phi2", a.phi2)?) {
        (Some(phi), None, None) => Some(BlockPhi::Balanced { phi }),
        (None, Some(phi1), Some(phi2)) => Some(BlockPhi::Unbalanced { phi1, phi2 }),
        (None, None, None) if block_defaults => Some(BlockPhi::Balanced { phi: p.get("phi", None, SYNTHETIC_BLOCK_PHI)? }),
        (None, None, None) => None,
        _ => return Err(Error::validation("give either --phi or both --phi1 and --phi2")),
    };
    set.c3 = p.opt("c3", a.c3)?;
    set.rho1 = p.opt("rho1", a.rho1)?;
    set.n_gamma = p.get("n-gamma", a.n_gamma, set.n_gamma)?;
    let sweeps = p.get("sweeps", a.sweeps, 0)?;
    let dump = ctx.dump_trace.clone();
    ctx.banner()?;

    ctx.emit(
        "data",
        json!({"groups": data.k(), "observations": data.big_m, "m": data.m, "ybar": data.ybar, "hyper": hyper}),
        &format!("data     K={} M={} m={:?} ybar={:.6}", data.k(), data.big_m, data.m, data.ybar),
    )?;
    let scan = hrem_minorization_scan(&data, &hyper, &set)?;
    ctx.emit(
        "minorization",
        to_json(&scan),
        &format!(
            "sampler  {} for target {target}\nchecks\n{}\nminor.   best d={:.4} d_R={:.6} ln beta_tilde_R={:.6}",
            scan.sampler,
            check_lines(&scan.checks),
            scan.d,
            scan.d_r,
            scan.ln_beta_tilde_r
        ),
    )?;
    let report = hrem_plan(&data, &hyper, &set)?;
    let mut body = to_json(&report);
    body["plan"] = plan_body(&report.plan);
    ctx.emit(
        "hrem-plan",
        body,
        &format!(
            "drift    lambda_R={:.6} K_R={:.6} d={:.4} -> beta_tilde={:.6e} lambda={:.6} K={:.6}\n\
             bounds   |f^2|_V<={:.6} piV<={:.6} V(x0)={:.6}\nchecks\n{}\n{}",
            report.rosenthal.lambda_r,
            report.rosenthal.k_r,
            report.d,
            report.drift.beta_tilde,
            report.drift.lambda,
            report.drift.k,
            report.fv_bound,
            report.pi_v,
            report.v_x0,
            check_lines(&report.checks),
            plan_text(&report.plan)
        ),
    )?;
    if !report.checks.iter().all(|c| c.holds) {
        eprintln!("warning: some preconditions do not hold; the plan is not certified");
    }

    if sweeps > 0 {
        let mut rng = stream_rng(ctx.seed, 0);
        let mut state: HremState = report.start.clone();
        let mut values = Vec::with_capacity(sweeps as usize);
        let mut writer = match &dump {
            Some(path) => {
                let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
                let mut h = vec!["index".to_string()];
                h.extend(state.header());
                w.write_record(&h).map_err(csv_err)?;
                Some(w)
            }
            None => None,
        };
        for i in 0..sweeps {
            state = match sampler {
                HremSampler::Block => block_gibbs_step(&state, &data, &hyper, &mut rng)?,
                HremSampler::FixedScan => fixed_scan_step(&state, &data, &hyper, &mut rng)?,
            };
            values.push(target.value(&state));
            if let Some(w) = writer.as_mut() {
                let mut rec = vec![i.to_string()];
                rec.extend(state.fields());
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        if let Some(mut w) = writer {
            w.flush()?;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let bm = batch_means_var(&values, 0.5).ok();
        let se = bm.map(|v| (v / values.len() as f64).sqrt());
        ctx.emit(
            "posterior",
            json!({"target": target, "sweeps": sweeps, "seed_stream": 0, "mean": mean, "bm_var": bm, "std_error": se}),
            &format!(
                "sampled  {sweeps} sweeps: {target} mean {mean:.6} (std error {})",
                se.map_or("n/a".to_string(), |v| format!("{v:.6}"))
            ),
        )?;
    }
    Ok(0)
}

// ---------------------------------------------------------------- adaptive

#[derive(Debug, Args)]
pub struct AdaptiveArgs {
    /// inhomogeneous or trap.
    #[arg(long)]
    pub example: Option<String>,
    /// Laziness of the second kernel.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Probability of the uniform kernel at each step (inhomogeneous).
    #[arg(long)]
    pub phi: Option<f64>,
    /// Steps per replication.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Starting state, 0 or 1.
    #[arg(long)]
    pub x0: Option<usize>,
}

pub fn adaptive_demo(a: &AdaptiveArgs, ctx: &mut Context) -> Result<i32> {
    let p = &ctx.params;
    let example = p.get("example", a.example.clone(), "inhomogeneous".to_string())?;
    let eps = p.get("eps", a.eps, 0.1)?;
    let n = p.get("n", a.n, 100)?;
    let reps = p.get("reps", a.reps, 10_000)?;
    let x0 = p.get("x0", a.x0, 0)?;
    if x0 > 1 {
        return Err(Error::validation("--x0 must be 0 or 1"));
    }
    if reps == 0 {
        return Err(Error::validation("--reps must be positive"));
    }
    let seed = ctx.seed;
    let (freqs, reference): (Vec<f64>, Box<dyn Fn(usize) -> f64>) = match example.as_str() {
        "inhomogeneous" => {
            let phi = p.get("phi", a.phi, 0.5)?;
            policy_inhomogeneous(phi, eps, 1, &mut stream_rng(seed, 0))?;
            ctx.banner()?;
            let f = state_one_frequencies(
                |rng| policy_inhomogeneous(phi, eps, n, rng).expect("validated"),
                x0,
                n,
                reps,
                seed,
            );
            (f, Box::new(move |k| inhomogeneous_tv_bound(phi, k as u32)))
        }
        "trap" => {
            policy_trap(eps)?;
            ctx.banner()?;
            let f = state_one_frequencies(|_| policy_trap(eps).expect("validated"), x0, n, reps, seed);
            (f, Box::new(move |_| trap_stationary_one(eps)))
        }
        other => return Err(Error::validation(format!("unknown example `{other}` (expected inhomogeneous or trap)"))),
    };
    let ref_name = if example == "trap" { "stationary_p_one" } else { "tv_bound" };
    ctx.emit("", Value::Null, &format!("step,p_one,tv_to_uniform,{ref_name}"))?;
    for (k, &f) in freqs.iter().enumerate() {
        let r = reference(k);
        ctx.emit(
            "frequency",
            json!({"example": example, "step": k, "p_one": f, "tv_to_uniform": tv_to_uniform(f), ref_name: r, "reps": reps}),
            &format!("{k},{f},{},{r}", tv_to_uniform(f)),
        )?;
    }
    Ok(0)
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Comma-separated criterion numbers; all when absent.
    #[arg(long, value_name = "LIST")]
    pub criteria: Option<String>,
}

pub fn verify(a: &VerifyArgs, ctx: &mut Context) -> Result<i32> {
    let ids: Vec<u32> = match ctx.params.list("criteria", a.criteria.clone())? {
        Some(v) => v,
        None => CRITERIA.iter().map(|c| c.0).collect(),
    };
    if let Some(bad) = ids.iter().find(|&&i| !CRITERIA.iter().any(|c| c.0 == i)) {
        return Err(Error::validation(format!("no criterion {bad}")));
    }
    let opts = VerifyOptions { seed: ctx.seed, quick: ctx.quick };
    ctx.banner()?;
    let mut failed = 0;
    for id in ids {
        let rep = run_criterion(id, &opts);
        if rep.status() == "FAIL" {
            failed += 1;
        }
        let mut text = format!("{} criterion {:>2}: {} ({:.2} s)", rep.status(), rep.id, rep.name, rep.seconds);
        for c in &rep.checks {
            text.push_str(&format!(
                "\n    [{}] {} = {:.6e} (want {})",
                if c.pass { "ok" } else { "x" },
                c.name,
                c.observed,
                c.expected
            ));
        }
        if let Some(e) = &rep.error {
            text.push_str(&format!("\n    error: {e}"));
        }
        let mut body = to_json(&rep);
        body["status"] = json!(rep.status());
        ctx.emit("criterion", body, &text)?;
    }
    ctx.emit(
        "summary",
        json!({"failed": failed}),
        &if failed == 0 { "all criteria passed".to_string() } else { format!("{failed} criterion(s) failed") },
    )?;
    Ok(if failed == 0 { 0 } else { EXIT_VERIFY_FAILED })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn large_counts_become_strings() {
        assert_eq!(count(5), json!(5));
        assert_eq!(count(u128::MAX), json!(u128::MAX.to_string()));
    }

    #[test]
    fn unknown_mode_rejected() {
        assert!(parse_mode("one-walk").is_ok());
        assert!(parse_mode("walk").is_err());
    }
}
