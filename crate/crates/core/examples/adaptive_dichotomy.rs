//! Two adaptive schemes built from the same pair of kernels: choosing the
//! kernel blindly keeps the uniform limit, choosing it from the current
//! state traps the chain.

use mcmc_cert::adaptive::{
    bound_B, policy_inhomogeneous, policy_trap, state_one_frequencies, trap_stationary_one, BoundSequences,
};

fn main() -> mcmc_cert::error::Result<()> {
    let (eps, n, reps) = (0.1, 1000, 20_000);
    let blind = state_one_frequencies(|rng| policy_inhomogeneous(0.5, eps, n, rng).unwrap(), 0, n, reps, 1);
    let trap = state_one_frequencies(|_| policy_trap(eps).unwrap(), 0, n, reps, 2);
    println!("P(X_n = 1) after {n} steps, {reps} replications");
    println!("  random kernel sequence: {:.4} (uniform 0.5)", blind[n]);
    println!("  state-dependent choice: {:.4} (trapped limit {:.4})", trap[n], trap_stationary_one(eps));

    // B(c1, c2, n) for geometric tau and R, a_n = 1/n^2.
    let len = 200;
    let tau: Vec<f64> = (0..=len).map(|k| 0.9f64.powi(k)).collect();
    let a: Vec<f64> = (0..=len).map(|k| if k == 0 { 0.0 } else { 1.0 / (k * k) as f64 }).collect();
    let seqs = BoundSequences::new(tau.clone(), a, tau)?;
    for k in [10, 50, 200] {
        println!("B(1, 1, {k}) = {:.5}", bound_B(1.0, 1.0, k, &seqs)?);
    }
    Ok(())
}
