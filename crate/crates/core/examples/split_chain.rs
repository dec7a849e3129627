//! Regenerations of the contracting-normals chain via retrospective bells,
//! and the tour-based estimates they give.

use mcmc_cert::chains::ContractingNormals;
use mcmc_cert::regen::{batch_means_var, regen_estimates, split_run_m1, tours};
use mcmc_cert::seeds::stream_rng;

fn main() -> mcmc_cert::error::Result<()> {
    let k = ContractingNormals::new(0.5, 1.6226)?;
    let n = 200_000;
    let trace = split_run_m1(&k, 0.0, n, &mut stream_rng(7, 0))?;
    println!(
        "bell frequency {:.4}  (beta_tilde pi(C) = {:.4})",
        trace.bell_frequency(),
        k.beta_tilde() * k.pi_c()
    );

    let b = tours(&trace, |x| *x)?;
    let r = regen_estimates(&b)?;
    println!("{} tours, mean length {:.3}", b.len(), b.mean_length());
    println!("ratio estimate {:.5}", r.i_hat);
    println!("variance: regenerative {:.4}, batch means {:.4}, exact 3", r.per_step_variance(), batch_means_var(&trace.states, 0.5)?);
    Ok(())
}
