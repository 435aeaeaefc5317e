//! The two-mode squeezed source: Fock amplitudes, photon statistics and the
//! covariance matrix checks.

use heralded::gaussian::{
    epr_state, photon_number_moments, photon_number_moments_truncated, standard_covariance, validate_gaussian,
    EprParams,
};

fn main() -> heralded::Result<()> {
    let p = EprParams::from_mean(1.5)?;
    println!("m̄ = {}, λ = {:.6}, r = {:.6}", p.m_bar(), p.lambda(), p.squeezing());

    let state = epr_state(p, 60);
    for (k, a) in state.iter().take(6) {
        println!("  |{0},{0}⟩  amplitude {1:.6}", k.m_minus(), a.re);
    }
    let exact = photon_number_moments(p);
    let summed = photon_number_moments_truncated(&state);
    println!(
        "mean {:.6} (summed {:.6}), variance {:.6} (summed {:.6})",
        exact.mean, summed.mean, exact.variance, summed.variance
    );

    let v = standard_covariance(p.squeezing())?;
    let report = validate_gaussian(&v)?;
    println!(
        "det V = {:.6}, pure = {}, physical = {}, EPR form = {}",
        v.determinant(),
        report.pure,
        report.physical,
        report.epr_form
    );
    Ok(())
}
