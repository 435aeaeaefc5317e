//! Dot–dot states left behind by a photon-count measurement.
//!
//! Tracing the photons out of a post-measurement [`JointState`] leaves a
//! density matrix on the sixteen dot-label pairs. Photon number per
//! polarization is conserved, so the spin–spin, trion–trion and mixed
//! sectors never interfere and each can be studied as a two-qubit state on
//! its own: `{z−, z+}` per dot in the spin sector, `{t−, t+}` in the trion
//! sector. The qubit index of a pair is `2·i1 + i2` with `i = 0` for the σ−
//! level.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::{joint_pre_splitter, DotParams};
use crate::error::{usage, Error, Result};
use crate::fock::{truncation_for_tail, DotLevel, JointKey, JointState, OccupationTuple};
use crate::optics::outcome_states_for_total;

/// Tolerance of the Hermiticity and positivity checks on density matrices.
pub const DENSITY_TOL: f64 = 1e-12;

/// Which two-level subspace of each dot a density matrix lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sector {
    Spin,
    Trion,
}

impl Sector {
    pub fn levels(self) -> [DotLevel; 2] {
        match self {
            Sector::Spin => [DotLevel::Zminus, DotLevel::Zplus],
            Sector::Trion => [DotLevel::Tminus, DotLevel::Tplus],
        }
    }

    fn contains(self, l: DotLevel) -> bool {
        l.is_trion() == (self == Sector::Trion)
    }
}

/// Two-qubit density matrix, possibly unnormalized.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitPairDensity {
    sector: Sector,
    rho: Matrix4<Complex64>,
}

impl QubitPairDensity {
    /// Validate Hermiticity and positivity to [`DENSITY_TOL`] (scaled by the trace).
    pub fn new(sector: Sector, rho: Matrix4<Complex64>) -> Result<Self> {
        let scale = rho.trace().re.abs().max(1.0);
        let skew = (rho - rho.adjoint()).camax();
        if skew > DENSITY_TOL * scale {
            return Err(usage(format!("density matrix is not Hermitian (deviation {skew:e})")));
        }
        let min = SymmetricEigen::new(hermitian_part(&rho)).eigenvalues.min();
        if min < -DENSITY_TOL * scale {
            return Err(usage(format!("density matrix has negative eigenvalue {min:e}")));
        }
        Ok(Self { sector, rho })
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// Unit-trace copy; a zero-trace matrix is an empty outcome.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= 0.0 {
            return Err(Error::EmptyOutcome);
        }
        Ok(Self {
            sector: self.sector,
            rho: self.rho.unscale(tr),
        })
    }

    /// `⟨ψ|ρ|ψ⟩ / tr ρ` for a normalized pure state `ψ`.
    pub fn overlap(&self, psi: &Vector4<Complex64>) -> Result<f64> {
        let n = self.normalized()?;
        Ok((psi.adjoint() * n.rho * psi)[(0, 0)].re)
    }

    /// Fidelity to `|Ψ−⟩ = (|−+⟩ − |+−⟩)/√2` of this sector.
    pub fn fidelity_to_bell(&self) -> Result<f64> {
        self.overlap(&psi_minus())
    }
}

/// `(|−+⟩ − |+−⟩)/√2` in the qubit ordering of this module.
pub fn psi_minus() -> Vector4<Complex64> {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Vector4::new(Complex64::new(0.0, 0.0), h, -h, Complex64::new(0.0, 0.0))
}

fn hermitian_part(rho: &Matrix4<Complex64>) -> Matrix4<Complex64> {
    (rho + rho.adjoint()).unscale(2.0)
}

/// Squared norms of the four sector combinations of a joint state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SectorWeights {
    pub spin_spin: f64,
    pub trion_trion: f64,
    /// Exactly one dot in a trion level.
    pub mixed: f64,
}

impl SectorWeights {
    pub fn of(s: &JointState) -> Self {
        let mut w = Self::default();
        for (k, a) in s.iter() {
            let slot = match (k.dot1.is_trion(), k.dot2.is_trion()) {
                (false, false) => &mut w.spin_spin,
                (true, true) => &mut w.trion_trion,
                _ => &mut w.mixed,
            };
            *slot += a.norm_sqr();
        }
        w
    }

    pub fn total(&self) -> f64 {
        self.spin_spin + self.trion_trion + self.mixed
    }
}

/// A photon-traced sector density together with the weights of every sector.
#[derive(Clone, Debug)]
pub struct Reduction {
    /// Unnormalized: its trace is the weight of the chosen sector.
    pub density: QubitPairDensity,
    pub weights: SectorWeights,
}

/// Trace the photons out of `s` and keep the rows and columns of `sector`.
pub fn reduce_density(s: &JointState, sector: Sector) -> Result<Reduction> {
    if s.norm_sqr() == 0.0 {
        return Err(Error::EmptyOutcome);
    }
    let mut by_photons: BTreeMap<OccupationTuple, Vector4<Complex64>> = BTreeMap::new();
    for (k, a) in s.iter() {
        if sector.contains(k.dot1) && sector.contains(k.dot2) {
            let idx = 2 * k.dot1.sector_index() + k.dot2.sector_index();
            by_photons.entry(k.photons).or_insert_with(Vector4::zeros)[idx] += a;
        }
    }
    let rho = by_photons
        .values()
        .fold(Matrix4::zeros(), |acc, v| acc + v * v.adjoint());
    Ok(Reduction {
        density: QubitPairDensity::new(sector, rho)?,
        weights: SectorWeights::of(s),
    })
}

/// Wootters concurrence of a two-qubit density matrix (normalized internally).
pub fn concurrence(rho: &QubitPairDensity) -> Result<f64> {
    let rho = hermitian_part(rho.normalized()?.matrix());
    let sy = Matrix4::from_fn(|i, j| {
        // σy ⊗ σy has entries −1 on the anti-diagonal corners and +1 in the middle.
        match (i, j) {
            (0, 3) | (3, 0) => Complex64::new(-1.0, 0.0),
            (1, 2) | (2, 1) => Complex64::new(1.0, 0.0),
            _ => Complex64::new(0.0, 0.0),
        }
    });
    // √ρ ρ̃ √ρ = A A† with A = √ρ (σy⊗σy) √ρ*, so the λ_i are the singular
    // values of A. Taking them directly avoids square roots of rounding noise.
    let eig = SymmetricEigen::new(rho);
    let sqrt_vals = eig.eigenvalues.map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0));
    let root = eig.eigenvectors * Matrix4::from_diagonal(&sqrt_vals) * eig.eigenvectors.adjoint();
    let a = root * sy * root.conjugate();
    let mut l: Vec<f64> = a.singular_values().iter().copied().collect();
    l.sort_by(|a, b| b.total_cmp(a));
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

/// Fidelity of the heralded dot state to `|Ψ−⟩` in the trion sector.
///
/// The normalization is the full outcome norm, so weight outside the trion
/// sector counts as infidelity.
pub fn fidelity_to_bell(s: &JointState) -> Result<f64> {
    let total = s.norm_sqr();
    if total == 0.0 {
        return Err(Error::EmptyOutcome);
    }
    Ok(bell_weight(s) / total)
}

/// `⟨Ψ−|ρ|Ψ−⟩` with `ρ` the unnormalized photon-traced state.
fn bell_weight(s: &JointState) -> f64 {
    let mut amp: BTreeMap<OccupationTuple, Complex64> = BTreeMap::new();
    for (k, a) in s.iter() {
        let sign = match (k.dot1, k.dot2) {
            (DotLevel::Tminus, DotLevel::Tplus) => 1.0,
            (DotLevel::Tplus, DotLevel::Tminus) => -1.0,
            _ => continue,
        };
        *amp.entry(k.photons).or_default() += a * sign;
    }
    amp.values().map(|a| a.norm_sqr()).sum::<f64>() / 2.0
}

/// Schmidt coefficients across the dot/photon cut, descending, of a normalized copy of `s`.
pub fn schmidt_coefficients(s: &JointState) -> Result<Vec<f64>> {
    let total = s.norm_sqr();
    if total == 0.0 {
        return Err(Error::EmptyOutcome);
    }
    let label = |l: DotLevel| DotLevel::ALL.iter().position(|x| *x == l).expect("known level");
    let mut by_photons: BTreeMap<OccupationTuple, [Complex64; 16]> = BTreeMap::new();
    for (k, a) in s.iter() {
        by_photons.entry(k.photons).or_insert([Complex64::new(0.0, 0.0); 16])[4 * label(k.dot1) + label(k.dot2)] +=
            a / total.sqrt();
    }
    let mut rho = DMatrix::<Complex64>::zeros(16, 16);
    for v in by_photons.values() {
        for i in 0..16 {
            for j in 0..16 {
                rho[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    let mut c: Vec<f64> = SymmetricEigen::new(rho)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    c.sort_by(|a, b| b.total_cmp(a));
    Ok(c)
}

/// Ideal π-pulse pair on each dot: swap `z∓ ↔ t∓`, with unit phases.
pub fn relabel_trions(s: &JointState) -> JointState {
    let swap = |l: DotLevel| match l {
        DotLevel::Zminus => DotLevel::Tminus,
        DotLevel::Zplus => DotLevel::Tplus,
        DotLevel::Tminus => DotLevel::Zminus,
        DotLevel::Tplus => DotLevel::Zplus,
    };
    JointState::from_entries(
        s.frame(),
        s.iter()
            .map(|(k, a)| (JointKey::new(swap(k.dot1), swap(k.dot2), k.photons), *a)),
    )
}

/// Weights of the even-even dot state `q0 |B0⟩⟨B0| + q↕ (|B↓⟩⟨B↓| + |B↑⟩⟨B↑|) + q₊ |B₊⟩⟨B₊|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvenEvenReport {
    pub q0: f64,
    /// Weight of `|t− t̃−⟩`; `|t+ t̃+⟩` carries the same.
    pub q_updown: f64,
    /// Weight of `|t+ t̃+⟩`, kept to show the equality.
    pub q_upup: f64,
    /// Coefficient of the unnormalized `|B₊⟩ = |t− t̃+⟩ + |t+ t̃−⟩`.
    pub q_plus: f64,
    pub inequality_holds: bool,
}

/// Post-measurement joint state of outcome `(n1, n2)` at time `t`.
///
/// Outcome `(n1, n2)` only involves input levels with `m + m̃ ≤ (n1+n2)/2 + 1`,
/// so truncating the source there is exact for this outcome.
pub fn heralded_state(p1: &DotParams, p2: &DotParams, t: f64, n1: u32, n2: u32) -> Result<JointState> {
    let n_max = ((n1 + n2) / 2 + 1) as usize;
    let pre = joint_pre_splitter(p1, p2, t, n_max)?;
    let mut states = outcome_states_for_total(&pre, n1 + n2)?;
    Ok(states
        .remove(&(n1, n2))
        .unwrap_or_else(|| JointState::new(crate::fock::Frame::PathsCD)))
}

/// Extract `q0`, `q↕`, `q₊` of an even-even outcome for identical dots and test `q↕ ≥ q₊`.
pub fn appendix_b_check(n1: u32, n2: u32, m_bar: f64, gt: f64) -> Result<EvenEvenReport> {
    if n1 % 2 == 1 || n2 % 2 == 1 {
        return Err(usage(format!("({n1}, {n2}) is not an even-even outcome")));
    }
    let p = DotParams::with_mean(1.0, m_bar)?;
    Ok(even_even_report(&heralded_state(&p, &p, gt, n1, n2)?))
}

/// `q` weights of an even-even post-measurement state.
pub fn even_even_report(s: &JointState) -> EvenEvenReport {
    let w = |a: DotLevel, b: DotLevel| s.sector_weight(a, b);
    let q0 = [DotLevel::Zminus, DotLevel::Zplus]
        .iter()
        .flat_map(|&a| [DotLevel::Zminus, DotLevel::Zplus].map(|b| w(a, b)))
        .sum();
    let q_updown = w(DotLevel::Tminus, DotLevel::Tminus);
    let q_plus = w(DotLevel::Tminus, DotLevel::Tplus);
    EvenEvenReport {
        q0,
        q_updown,
        q_upup: w(DotLevel::Tplus, DotLevel::Tplus),
        q_plus,
        inequality_holds: q_updown >= q_plus - DENSITY_TOL,
    }
}

/// Branch weights of an odd-even outcome, where exactly one dot is excited.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OddEvenReport {
    /// Weight with the excited dot in `t−`.
    pub minus_branch: f64,
    /// Weight with the excited dot in `t+`.
    pub plus_branch: f64,
    pub weights: SectorWeights,
}

pub fn odd_even_branches(s: &JointState) -> OddEvenReport {
    let (mut minus_branch, mut plus_branch) = (0.0, 0.0);
    for (k, a) in s.iter() {
        if k.dot1.is_trion() != k.dot2.is_trion() {
            let excited = if k.dot1.is_trion() { k.dot1 } else { k.dot2 };
            if excited == DotLevel::Tminus {
                minus_branch += a.norm_sqr();
            } else {
                plus_branch += a.norm_sqr();
            }
        }
    }
    OddEvenReport {
        minus_branch,
        plus_branch,
        weights: SectorWeights::of(s),
    }
}

/// Result of a mismatch sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct MismatchReport {
    /// `Σ_t Σ_{odd-odd} P F / Σ_t Σ_{odd-odd} P`.
    pub fidelity: f64,
    /// Mean heralding probability over the time grid.
    pub herald_probability: f64,
    /// `(t, heralding probability, conditional fidelity)` per grid time.
    pub per_time: Vec<(f64, f64, f64)>,
    /// Source truncation used for both dots.
    pub n_max: usize,
}

/// `n` equally spaced times on `(0, t_max]`.
pub fn uniform_time_grid(t_max: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| t_max * i as f64 / n as f64).collect()
}

/// Source truncation whose neglected weight is below this, per dot.
pub const MISMATCH_TAIL: f64 = 1e-7;

/// Heralded fidelity to `|Ψ−⟩` when dot 2 has `λ(1+δλ)` and `g(1+δg)`.
///
/// Dot 1 has `g = 1` and the `λ` of mean photon number `m̄`; times are in
/// units of `1/g`. Each odd-odd outcome at each time is weighted by its
/// probability, i.e. the average is conditioned on heralding.
pub fn mismatch_fidelity_study(
    delta_lambda_rel: f64,
    delta_g_rel: f64,
    m_bar: f64,
    t_grid: &[f64],
) -> Result<MismatchReport> {
    if !(delta_lambda_rel >= 0.0 && delta_g_rel >= 0.0) {
        return Err(usage("relative deviations must be nonnegative"));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(usage("time grid must be nonempty and positive"));
    }
    let p1 = DotParams::with_mean(1.0, m_bar)?;
    let p2 = DotParams::new(1.0 + delta_g_rel, p1.lambda() * (1.0 + delta_lambda_rel))?;
    let n_max = truncation_for_tail(p2.lambda().max(p1.lambda()), MISMATCH_TAIL)?;
    let per_time: Vec<(f64, f64, f64)> = t_grid
        .par_iter()
        .map(|&t| {
            let pre = joint_pre_splitter(&p1, &p2, t, n_max)?;
            let (mut prob, mut good) = (0.0, 0.0);
            for total in (2..=2 * (n_max as u32 + 1)).step_by(2) {
                for ((n1, _), s) in outcome_states_for_total(&pre, total)? {
                    if n1 % 2 == 1 {
                        prob += s.norm_sqr();
                        good += bell_weight(&s);
                    }
                }
            }
            Ok((t, prob, if prob > 0.0 { good / prob } else { 1.0 }))
        })
        .collect::<Result<_>>()?;
    let prob: f64 = per_time.iter().map(|e| e.1).sum();
    let good: f64 = per_time.iter().map(|e| e.1 * e.2).sum();
    Ok(MismatchReport {
        fidelity: if prob > 0.0 { good / prob } else { 1.0 },
        herald_probability: prob / t_grid.len() as f64,
        per_time,
        n_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Frame;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn concurrence_of_reference_states() {
        let bell = psi_minus();
        let pure = QubitPairDensity::new(Sector::Trion, bell * bell.adjoint()).unwrap();
        assert!((concurrence(&pure).unwrap() - 1.0).abs() < 1e-12);
        let mixed = QubitPairDensity::new(Sector::Spin, Matrix4::identity().unscale(4.0)).unwrap();
        assert!(concurrence(&mixed).unwrap().abs() < 1e-12);
        let product = Vector4::new(c(1.0), c(0.0), c(0.0), c(0.0));
        let prod = QubitPairDensity::new(Sector::Spin, product * product.adjoint()).unwrap();
        assert!(concurrence(&prod).unwrap().abs() < 1e-12);
        // Werner state p|Ψ−⟩⟨Ψ−| + (1−p) I/4 has C = max(0, (3p−1)/2).
        let p = 0.8;
        let werner = (bell * bell.adjoint()).scale(p) + Matrix4::identity().scale((1.0 - p) / 4.0);
        let w = QubitPairDensity::new(Sector::Spin, werner).unwrap();
        assert!((concurrence(&w).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn dephased_mixture_has_half_fidelity() {
        let rho = Matrix4::from_diagonal(&Vector4::new(c(0.0), c(0.5), c(0.5), c(0.0)));
        let d = QubitPairDensity::new(Sector::Trion, rho).unwrap();
        assert!((d.fidelity_to_bell().unwrap() - 0.5).abs() < 1e-15);
        assert!(concurrence(&d).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_matrices() {
        let mut rho = Matrix4::identity().unscale(4.0);
        rho[(0, 1)] = c(0.3);
        assert!(QubitPairDensity::new(Sector::Spin, rho).is_err());
        let neg = Matrix4::from_diagonal(&Vector4::new(c(1.2), c(-0.2), c(0.0), c(0.0)));
        assert!(QubitPairDensity::new(Sector::Spin, neg).is_err());
        let empty = JointState::new(Frame::PathsCD);
        assert!(matches!(
            reduce_density(&empty, Sector::Trion),
            Err(Error::EmptyOutcome)
        ));
        assert!(matches!(fidelity_to_bell(&empty), Err(Error::EmptyOutcome)));
    }

    #[test]
    fn vacuum_outcome_at_time_zero_is_x_plus_pair() {
        let p = DotParams::with_mean(1.0, 0.8).unwrap();
        let s = heralded_state(&p, &p, 0.0, 0, 0).unwrap();
        let r = reduce_density(&s, Sector::Spin).unwrap();
        let d = r.density.normalized().unwrap();
        let h = c(0.5);
        let xx = Vector4::new(h, h, h, h);
        assert!((d.overlap(&xx).unwrap() - 1.0).abs() < 1e-12);
        assert!(concurrence(&d).unwrap() < 1e-12);
        assert_eq!(r.weights.trion_trion, 0.0);
        let b = appendix_b_check(0, 0, 0.8, 0.0).unwrap();
        assert!((b.q0 - s.norm_sqr()).abs() < 1e-15 && b.q_updown == 0.0 && b.q_plus == 0.0);
    }

    #[test]
    fn odd_odd_outcomes_herald_psi_minus() {
        let p = DotParams::with_mean(1.0, 1.3).unwrap();
        for (n1, n2) in [(1, 1), (1, 3), (3, 3), (5, 1)] {
            let s = heralded_state(&p, &p, 2.7, n1, n2).unwrap();
            assert!(s.norm_sqr() > 1e-8);
            assert!((fidelity_to_bell(&s).unwrap() - 1.0).abs() < 1e-10);
            let r = reduce_density(&s, Sector::Trion).unwrap();
            assert!((concurrence(&r.density).unwrap() - 1.0).abs() < 1e-10);
            let schmidt = schmidt_coefficients(&s).unwrap();
            assert!((schmidt[0] - 1.0).abs() < 1e-10 && schmidt[1] < 1e-6);
            // After the π pulses the same Bell state lives on the spins.
            let spins = reduce_density(&relabel_trions(&s), Sector::Spin).unwrap();
            assert!((spins.density.fidelity_to_bell().unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn even_even_and_odd_even_structure() {
        let b = appendix_b_check(2, 2, 1.0, 1.0).unwrap();
        assert!(b.inequality_holds);
        assert!((b.q_updown - b.q_upup).abs() < 1e-14);
        assert!(appendix_b_check(1, 2, 1.0, 1.0).is_err());
        let p = DotParams::with_mean(1.0, 2.0).unwrap();
        let s = heralded_state(&p, &p, 3.1, 2, 1).unwrap();
        let r = odd_even_branches(&s);
        assert!(r.weights.trion_trion < 1e-14 && r.weights.spin_spin < 1e-14);
        assert!((r.minus_branch - r.plus_branch).abs() < 1e-12 * s.norm_sqr());
    }

    #[test]
    fn matched_dots_give_unit_fidelity() {
        let grid = uniform_time_grid(4.0, 3);
        let r = mismatch_fidelity_study(0.0, 0.0, 0.6, &grid).unwrap();
        assert!((r.fidelity - 1.0).abs() < 1e-10);
        assert!(mismatch_fidelity_study(-1e-3, 0.0, 0.6, &grid).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn trace_then_normalize_commutes(m in 0.1..2.0f64, gt in 0.0..10.0f64, n1 in 0u32..4, n2 in 0u32..4) {
            let p = DotParams::with_mean(1.0, m).unwrap();
            let s = heralded_state(&p, &p, gt, n1, n2).unwrap();
            prop_assume!(s.norm_sqr() > 1e-10);
            let mut unit = s.clone();
            unit.scale(c(1.0 / s.norm_sqr().sqrt()));
            for sector in [Sector::Spin, Sector::Trion] {
                let a = reduce_density(&s, sector).unwrap().density;
                let b = reduce_density(&unit, sector).unwrap().density;
                let diff = (a.matrix().unscale(s.norm_sqr()) - b.matrix()).camax();
                prop_assert!(diff < 1e-12);
            }
        }
    }
}
