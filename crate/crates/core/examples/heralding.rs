//! Post-selected dot states: odd-odd counts herald a Bell pair, even-even
//! counts leave a separable mixture, odd-even counts excite only one dot.

use heralded::dynamics::DotParams;
use heralded::entanglement::{
    appendix_b_check, concurrence, fidelity_to_bell, heralded_state, odd_even_branches, reduce_density, Sector,
};

fn main() -> heralded::Result<()> {
    let p = DotParams::with_mean(1.0, 1.2)?;
    let t = 2.7;
    for (n1, n2) in [(1, 1), (1, 3), (3, 5)] {
        let s = heralded_state(&p, &p, t, n1, n2)?;
        let c = concurrence(&reduce_density(&s, Sector::Trion)?.density)?;
        println!(
            "({n1},{n2}): P = {:.3e}, fidelity to Ψ− = {:.12}, concurrence = {c:.12}",
            s.norm_sqr(),
            fidelity_to_bell(&s)?
        );
    }
    let q = appendix_b_check(2, 2, 1.2, t)?;
    println!(
        "(2,2): q↕ = {:.3e}, q₊ = {:.3e}, separable = {}",
        q.q_updown, q.q_plus, q.inequality_holds
    );
    let odd_even = odd_even_branches(&heralded_state(&p, &p, t, 1, 2)?);
    println!(
        "(1,2): t− branch {:.3e}, t+ branch {:.3e}, both excited {:.1e}",
        odd_even.minus_branch, odd_even.plus_branch, odd_even.weights.trion_trion
    );
    Ok(())
}
