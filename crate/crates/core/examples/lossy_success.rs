//! Success probability with lossy detectors, the half-maximum photon number
//! and the first-order loss coefficient.

use std::sync::Arc;

use heralded::analysis::{
    prob_succ_ideal, CCoefficientTable, DetectorModel, RooftopModel, SuccessMethod, SuccessModel,
};

fn main() -> heralded::Result<()> {
    let model = SuccessModel::new(Arc::new(CCoefficientTable::build(120)), RooftopModel::default());
    let method = SuccessMethod::Hybrid(120);
    println!("ideal detectors, m̄ = 1: {:.6}", prob_succ_ideal(1.0)?);
    for eta in [1.0, 0.3, 0.1, 0.03] {
        let d = DetectorModel::new(eta)?;
        let half = model.m_half(&d)?;
        let at_ten = model.prob_succ(10.0 * half, &d, method)?.value;
        println!(
            "η = {eta:<5} m̄½ = {half:>8.3}  η·m̄½ = {:.4}  P(10 m̄½) = {at_ten:.5}",
            eta * half
        );
    }
    let (m, z) = model.zeta_maximum()?;
    println!("largest first-order loss coefficient {z:.5} at m̄ = {m:.3}");
    Ok(())
}
