//! Summarise a long walk in one pass: mean, batch means and regenerative
//! variance without storing the path.

use mcmc_cert::chains::ContractingNormals;
use mcmc_cert::regen::{stream_walk, WalkWindow};
use mcmc_cert::seeds::stream_rng;

fn main() -> mcmc_cert::error::Result<()> {
    let k = ContractingNormals::new(0.5, 1.6226)?;
    let n: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5_000_000);
    let window = WalkWindow::new(1_000, n);
    let mut far = 0u64;
    let s = stream_walk(&k, 0.0, &window, |x| *x, &mut stream_rng(1, 0), |_, x, _| {
        if x.abs() > 4.0 {
            far += 1;
        }
    })?;
    println!("{} samples after 1000 burn-in: mean {:.5}, sd of mean {:.5}", s.n, s.mean, (3.0 / n as f64).sqrt());
    println!("batch means {:.4}", s.bm_var.unwrap_or(f64::NAN));
    if let Some(r) = s.regen {
        println!("regenerative {:.4} over {} tours", r.per_step_variance(), r.tours);
    }
    println!("{far} visits to |x| > 4");
    Ok(())
}
