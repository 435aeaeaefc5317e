//! Heralded pairs per minute for a few collection efficiencies.

use heralded::analysis::prob_succ_ideal;
use heralded::cli::{rate_estimate, RateInputs};

fn main() -> heralded::Result<()> {
    let repetition = 1.0 / 1.3e-6;
    let p = prob_succ_ideal(2.08)?;
    for c in [0.02, 0.05, 0.1, 0.3] {
        let r = rate_estimate(&RateInputs::new(c, p, repetition)?);
        println!("collection {c:<4}: {r:>10.1} per minute");
    }
    Ok(())
}
