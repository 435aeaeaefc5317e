//! Time-averaged detector outcome probabilities and the coefficients behind
//! them.

use heralded::analysis::{c_coefficient, d_sum, prob_avg, ProbabilityGrid};

fn main() -> heralded::Result<()> {
    for n3 in 1..=4 {
        let row: Vec<String> = (1..2 * n3)
            .step_by(2)
            .map(|n1| format!("{:.5}", c_coefficient(n1, 2 * n3 - n1).unwrap()))
            .collect();
        println!("n3 = {n3}: C = [{}], D = {:.5}", row.join(", "), d_sum(n3));
    }
    println!("averaged P(1,1) at m̄ = 1: {:.6}", prob_avg(1, 1, 1.0)?);

    let grid = ProbabilityGrid::build(60);
    let m = 0.8;
    println!(
        "all outcomes up to 60 photons at m̄ = {m}: missing mass {:.2e}",
        grid.tail(m)?
    );
    for (n1, n2) in [(0, 0), (1, 1), (2, 0), (1, 2), (2, 2)] {
        println!("  P({n1},{n2}) = {:.6}", grid.probability(n1, n2, m).unwrap());
    }
    Ok(())
}
