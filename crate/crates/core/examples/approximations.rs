//! Rooftop and hybrid approximations of the coefficients against the exact
//! table.

use std::sync::Arc;

use heralded::analysis::{
    shells_for_tail, success::EXACT_TAIL, CCoefficientTable, DetectorModel, RooftopModel, SuccessMethod, SuccessModel,
};

fn main() -> heralded::Result<()> {
    let table = CCoefficientTable::build(160);
    let fit = RooftopModel::fit(&table, 100, 160)?;
    println!(
        "spread σ(n3) ≈ {:.5}·n3 + {:.5}, worst residual {:.2}%",
        fit.model.alpha,
        fit.model.beta,
        100.0 * fit.max_relative_residual
    );
    let n3 = 150;
    for n1 in [1, 51, 101, 149, 199, 299] {
        println!(
            "  C({n1},{}) = {:.6}  rooftop {:.6}",
            2 * n3 - n1,
            table.get(n1, 2 * n3 - n1)?,
            fit.model.coefficient(n1, n3)
        );
    }

    let model = SuccessModel::new(Arc::new(table), fit.model);
    let d = DetectorModel::new(0.2)?;
    model.prepare(&[d], shells_for_tail(20.0, EXACT_TAIL));
    for m in [0.5, 2.0, 8.0, 20.0] {
        let exact = model.prob_succ(m, &d, SuccessMethod::ExactTruncated(None))?.value;
        let roof = model.prob_succ(m, &d, SuccessMethod::Rooftop)?.value;
        let hyb = model.prob_succ(m, &d, SuccessMethod::Hybrid(160))?.value;
        println!(
            "m̄ = {m:>4}: exact {exact:.6}, rooftop {:+.3}%, hybrid {:+.4}%",
            100.0 * (roof / exact - 1.0),
            100.0 * (hyb / exact - 1.0)
        );
    }
    Ok(())
}
