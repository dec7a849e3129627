//! Run lengths for the contracting-normals chain at `eps = 0.1`: one walk
//! at two confidence levels and a median of short runs.

use mcmc_cert::chains::normals::cn_plan_problem;
use mcmc_cert::planner::{optimize_plan, plan_median, plan_one_walk, PlanGrids, PlanMode, DEFAULT_A};

fn main() -> mcmc_cert::error::Result<()> {
    let problem = cn_plan_problem(0.5, 1.6226)?;
    let inp = problem.inputs(0.915, 0.971)?;
    println!("M(0.915) = {:.0}, M_2(0.971) = {:.1}", inp.rate_v.m, inp.rate_vr.m);
    println!("pi V <= {:.4}, |f_c^2|_V <= {:.4}", inp.pi_v, inp.fc_norm);

    for alpha in [0.1, 1e-5] {
        let p = plan_one_walk(0.1, alpha, &inp, Some(1.0))?;
        println!("one walk, alpha = {alpha:e}: t = {}, n = {:.3e}", p.t, p.n as f64);
    }
    let med = plan_median(0.1, 1e-5, Some(DEFAULT_A), None, &inp, Some(1.0))?;
    println!(
        "median, alpha = 1e-5: m = {}, t = {}, n = {:.3e}, total = {:.3e}",
        med.m, med.t, med.n as f64, med.total_cost as f64
    );

    // Letting the planner choose (gamma, gamma_2) as well.
    let grids = PlanGrids::above_rho(&problem, 40, None)?;
    let best = optimize_plan(&problem, 0.1, 0.1, PlanMode::OneWalk, &grids)?;
    println!(
        "optimised one walk: gamma = {:.4}, gamma_2 = {:.4}, n = {:.3e}",
        best.meta.gamma, best.meta.gamma_r, best.n as f64
    );
    Ok(())
}
