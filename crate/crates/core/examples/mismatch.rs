//! Heralded fidelity when the two dots and their sources are not identical.

use std::f64::consts::PI;

use heralded::entanglement::{mismatch_fidelity_study, uniform_time_grid};

fn main() -> heralded::Result<()> {
    let times = uniform_time_grid(10.0 * PI, 40);
    for dev in [0.0, 1e-4, 1e-3, 1e-2] {
        let r = mismatch_fidelity_study(dev, dev, 1.0, &times)?;
        println!(
            "δλ/λ = δg/g = {dev:.0e}: fidelity {:.6}, herald probability {:.4}",
            r.fidelity, r.herald_probability
        );
    }
    Ok(())
}
