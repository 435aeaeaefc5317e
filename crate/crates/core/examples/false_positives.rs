//! Coincidences that do not herald entanglement, compared with true heralds.

use heralded::analysis::{prob_false_positive, prob_succ_ideal, DetectorModel, ProbabilityGrid};

fn main() -> heralded::Result<()> {
    let grid = ProbabilityGrid::build(120);
    let d = DetectorModel::ideal();
    for m in [0.2, 1.0, 3.0] {
        let tp = prob_succ_ideal(m)?;
        let fp = prob_false_positive(m, &d, &grid)?;
        println!(
            "m̄ = {m}: true {tp:.5}, false {:.5} (tail ≤ {:.1e}), ratio {:.2}",
            fp.value,
            fp.tail_bound,
            fp.value / tp
        );
    }
    Ok(())
}
