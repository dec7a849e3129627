//! Asymptotic variance from the tours of a 4-skeleton split, against the
//! exact value from the fundamental matrix.

use mcmc_cert::chains::finite::{five_state, five_state_split};
use mcmc_cert::regen::{regen_sigma2, split_run_finite, tours};
use mcmc_cert::seeds::stream_rng;

fn main() -> mcmc_cert::error::Result<()> {
    let chain = five_state();
    let (m, eps, nu, cset) = five_state_split();
    let f = [1.0, -2.0, 0.5, 3.0, 0.0];
    let exact = chain.asymptotic_variance(&f)?;
    let pi_c: f64 = chain.stationary()?.iter().zip(&cset).filter(|(_, &c)| c).map(|(p, _)| p).sum();

    for n in [10_000, 100_000, 400_000] {
        let trace = split_run_finite(&chain, m, eps, &nu, &cset, 0, n, &mut stream_rng(9, n as u64))?;
        let b = tours(&trace, |&x| f[x])?;
        let s2 = regen_sigma2(&b, eps, pi_c, m)?;
        println!("{n:>7} skeleton steps, {:>6} tours: sigma^2 = {s2:.4}  (exact {exact:.4})", b.len());
    }
    Ok(())
}
