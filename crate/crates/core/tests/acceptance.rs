use mcmc_cert::seeds::DEFAULT_SEED;
use mcmc_cert::verify::{run_criterion, VerifyOptions, CRITERIA};

#[test]
fn acceptance() {
    let opts = VerifyOptions { seed: DEFAULT_SEED, quick: false };
    let mut failed = Vec::new();
    for &(id, _) in CRITERIA.iter() {
        let r = run_criterion(id, &opts);
        println!("{} criterion {:>2}: {} ({:.2} s)", r.status(), r.id, r.name, r.seconds);
        for c in &r.checks {
            println!("      [{}] {} = {:.6e} (want {})", if c.pass { "ok" } else { "x" }, c.name, c.observed, c.expected);
        }
        if let Some(e) = &r.error {
            println!("      error: {e}");
        }
        if !r.pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
