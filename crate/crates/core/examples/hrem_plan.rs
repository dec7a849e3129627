//! End-to-end plan for the posterior mean of `mu` in a small balanced
//! random effects model, followed by a short run of the block sampler.

use mcmc_cert::chains::hrem::{block_gibbs_step, synthetic_balanced, SYNTHETIC_BLOCK_LAMBDA_R, SYNTHETIC_BLOCK_PHI};
use mcmc_cert::chains::hrem_bounds::{hrem_plan, BlockPhi, HremPlanSettings, HremTarget};
use mcmc_cert::seeds::stream_rng;

fn main() -> mcmc_cert::error::Result<()> {
    let (data, hyper) = synthetic_balanced();
    let mut set = HremPlanSettings::new(HremTarget::Mu, 0.1, 0.1);
    set.lambda_r = Some(SYNTHETIC_BLOCK_LAMBDA_R);
    set.phi = Some(BlockPhi::Balanced { phi: SYNTHETIC_BLOCK_PHI });

    let rep = hrem_plan(&data, &hyper, &set)?;
    for c in &rep.checks {
        println!("[{}] {} ({})", if c.holds { "ok" } else { "x" }, c.name, c.detail);
    }
    println!(
        "beta_tilde = {:.4}, lambda = {:.4}, K = {:.2}, pi V <= {:.2}",
        rep.drift.beta_tilde, rep.drift.lambda, rep.drift.k, rep.pi_v
    );
    println!("plan: t = {}, n = {:.3e}", rep.plan.t, rep.plan.n as f64);

    let mut rng = stream_rng(5, 0);
    let mut s = rep.start.clone();
    let mut sum = 0.0;
    let sweeps = 50_000;
    for _ in 0..sweeps {
        s = block_gibbs_step(&s, &data, &hyper, &mut rng)?;
        sum += s.mu;
    }
    println!("{sweeps} sweeps: posterior mean of mu ~ {:.5}", sum / sweeps as f64);
    Ok(())
}
