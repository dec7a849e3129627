//! Convergence rate and prefactor for the contracting-normals chain.
//!
//! `cargo run --example contracting_normals_rates -- 0.5 1.6226`

use mcmc_cert::chains::normals::cn_drift;
use mcmc_cert::drift::{pi_v_bound, power_transform};
use mcmc_cert::ratebounds::{rate_bounds_on_grid, rho};

fn main() -> mcmc_cert::error::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let theta = args.first().copied().unwrap_or(0.5);
    let c = args.get(1).copied().unwrap_or(1.6226);

    let (dp, class) = cn_drift(theta, c)?;
    let dr = power_transform(&dp, 2.0)?;
    println!("theta = {theta}, C = [-{c}, {c}], class {class}");
    println!("beta_tilde = {:.6}  lambda = {:.6}  K = {:.6}", dp.beta_tilde, dp.lambda, dp.k);
    println!("rho = {:.6}  rho_2 = {:.6}  pi V <= {:.4}", rho(&dp, class)?, rho(&dr, class)?, pi_v_bound(&dp));

    let gammas = [0.9, 0.915, 0.93, 0.95, 0.971, 0.99];
    let v = rate_bounds_on_grid(&dp, class, &gammas)?;
    let v2 = rate_bounds_on_grid(&dr, class, &gammas)?;
    println!("{:>7} {:>14} {:>14}", "gamma", "M", "M_2");
    for ((g, a), b) in gammas.iter().zip(&v).zip(&v2) {
        let show = |r: &mcmc_cert::error::Result<mcmc_cert::ratebounds::RateBound>| match r {
            Ok(x) => format!("{:.4e}", x.m),
            Err(_) => "-".into(),
        };
        println!("{g:>7} {:>14} {:>14}", show(a), show(b));
    }
    Ok(())
}
