//! Balanced beam splitter: exact matrix elements and two-photon bunching.

use heralded::fock::{Frame, OccupationTuple, PhotonVector};
use heralded::optics::{bs_element, bs_transform, kravchuk_sum, outcome_distribution};

fn main() -> heralded::Result<()> {
    // Orthogonality of the n = 6 one-mode elements.
    let n = 6;
    let dot: f64 = (0..=n)
        .map(|l| bs_element(n, 2, l).unwrap() * bs_element(n, 4, l).unwrap())
        .sum();
    println!("Σ_l E(6;2,l) E(6;4,l) = {dot:.1e}");
    println!("exact K(40; 13, 21) = {}", kravchuk_sum(40, 13, 21));

    // One σ− photon in each input path: both leave through the same port.
    for (label, occ) in [
        ("same polarization", OccupationTuple::new(1, 0, 1, 0)),
        ("crossed polarization", OccupationTuple::new(1, 0, 0, 1)),
    ] {
        let input = PhotonVector::basis(Frame::PathsAB, occ);
        let dist = outcome_distribution(&bs_transform(&input)?)?;
        let coincidence = dist.get(&(1, 1)).copied().unwrap_or(0.0);
        println!(
            "{label}: P(1,1) = {coincidence:.3}, P(2,0) = {:.3}",
            dist.get(&(2, 0)).copied().unwrap_or(0.0)
        );
    }
    Ok(())
}
