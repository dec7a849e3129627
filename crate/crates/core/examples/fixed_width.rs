//! Sequential fixed-width stopping with batch-means and regenerative
//! variance estimates.

use mcmc_cert::chains::ContractingNormals;
use mcmc_cert::regen::{fixed_width_run, FixedWidthConfig, FixedWidthMethod};
use mcmc_cert::seeds::stream_rng;

fn main() -> mcmc_cert::error::Result<()> {
    let k = ContractingNormals::new(0.5, 1.6226)?;
    for method in [FixedWidthMethod::BatchMeans, FixedWidthMethod::Regenerative] {
        for eps in [0.1, 0.05, 0.02] {
            let cfg = FixedWidthConfig::new(eps, 0.1, method);
            let r = fixed_width_run(&k, 0.0, |x| *x, &cfg, &mut stream_rng(11, 0))?;
            println!(
                "{method:?} eps={eps}: stopped={} after {} steps, estimate {:.4} in [{:.4}, {:.4}], var {:.3}",
                r.stopped, r.steps, r.estimate, r.interval.0, r.interval.1, r.variance
            );
        }
    }
    Ok(())
}
