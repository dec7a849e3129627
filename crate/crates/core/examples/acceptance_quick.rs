//! The arithmetic acceptance criteria, run from library code.

use mcmc_cert::seeds::DEFAULT_SEED;
use mcmc_cert::verify::{run_criterion, VerifyOptions};

fn main() {
    let opts = VerifyOptions { seed: DEFAULT_SEED, quick: true };
    for id in [1, 2, 3] {
        let r = run_criterion(id, &opts);
        println!("{} {:>2} {}", r.status(), r.id, r.name);
        for c in &r.checks {
            println!("    {:<36} {:>14.6e}  want {}", c.name, c.observed, c.expected);
        }
    }
}
