//! From a drift towards a constant (`PV <= lambda V + K`) to the
//! small-set form used by the rate bounds, over a range of conversion
//! parameters.

use mcmc_cert::drift::{rosenthal_to_baxendale, RosenthalDrift};
use mcmc_cert::ratebounds::{rho, OperatorClass};

fn main() -> mcmc_cert::error::Result<()> {
    let base = RosenthalDrift::new(0.2, 0.5)?;
    println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "d", "d_R", "lambda", "K", "rho");
    for d in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let d_r = base.small_set_level(d);
        let rd = base.with_minorization(d_r, 0.9)?;
        let dp = rosenthal_to_baxendale(&rd, d)?;
        println!(
            "{d:>8} {d_r:>10.3} {:>10.4} {:>10.4} {:>10.6}",
            dp.lambda,
            dp.k,
            rho(&dp, OperatorClass::General)?
        );
    }
    Ok(())
}
