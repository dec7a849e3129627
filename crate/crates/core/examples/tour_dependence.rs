//! Tours of an m-skeleton split need not be independent. A chi-square test
//! on (last state of a tour, first state of the next) shows it for the
//! five-state chain and not for a one-step split.

use mcmc_cert::regen::{tour_dependence_probe, two_state_control_probe, DependenceReport};
use mcmc_cert::seeds::stream_rng;

fn show(name: &str, r: &DependenceReport) {
    println!("{name}: {} tour pairs, chi2 = {:.1} on {} dof, p = {:.3e}", r.tours, r.chi2, r.dof, r.p_value);
    println!("  exact max |P(first | last) - P(first)| = {:.4}", r.exact_gap);
    for (row, counts) in r.rows.iter().zip(&r.counts) {
        println!("  last {row}: {counts:?}  (first in {:?})", r.cols);
    }
}

fn main() -> mcmc_cert::error::Result<()> {
    show("five-state, m = 4", &tour_dependence_probe(20_000, &mut stream_rng(3, 0))?);
    show("two-state, m = 1", &two_state_control_probe(20_000, &mut stream_rng(3, 1))?);
    Ok(())
}
