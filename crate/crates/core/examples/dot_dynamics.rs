//! One dot driven by its EPR beam: level populations oscillate as the dot
//! absorbs and re-emits a photon of either polarization.

use heralded::dynamics::{jc_evolve, DotParams};
use heralded::fock::DotLevel;

fn main() -> heralded::Result<()> {
    let p = DotParams::with_mean(1.0, 0.7)?;
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "gt", "z−", "z+", "t−", "t+");
    for i in 0..=10 {
        let t = i as f64 * 0.5;
        let s = jc_evolve(&p, t, 40)?;
        let pop = |l: DotLevel| {
            s.iter()
                .filter(|(k, _)| k.dot == l)
                .fold(0.0, |acc, (_, a)| acc + a.norm_sqr())
        };
        println!(
            "{t:>6.2} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            pop(DotLevel::Zminus),
            pop(DotLevel::Zplus),
            pop(DotLevel::Tminus),
            pop(DotLevel::Tplus)
        );
    }
    Ok(())
}
