//! Resonant Jaynes–Cummings evolution of a dot driven by its EPR photon pair.
//!
//! In the Faraday geometry `|z−⟩ ↔ |t−⟩` couples only to σ− light and
//! `|z+⟩ ↔ |t+⟩` only to σ+ light. The interaction Hamiltonian therefore
//! splits into independent two-level problems, one per Fock level:
//! `|z−⟩|m−, m+⟩ ↔ |t−⟩|m−−1, m+⟩` rotates at `g√m−`, and the σ+ channel
//! likewise at `g√m+`. Each rotation is applied in closed form, so the
//! evolution is exactly unitary.

use num_complex::Complex64;

use crate::error::{domain, Result};
use crate::fock::{BasisKey, DotLevel, FockState, Frame, JointKey, JointState, OccupationTuple};
use crate::gaussian::{epr_state, EprParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Spin amplitudes `(⟨z−|ψ⟩, ⟨z+|ψ⟩)` of a dot's ground doublet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinState {
    pub minus: Complex64,
    pub plus: Complex64,
}

impl SpinState {
    pub fn new(minus: Complex64, plus: Complex64) -> Result<Self> {
        let n = minus.norm_sqr() + plus.norm_sqr();
        if (n - 1.0).abs() > 1e-12 {
            return Err(domain(format!("spin state has norm² {n}, expected 1")));
        }
        Ok(Self { minus, plus })
    }

    /// `|x+⟩ = (|z−⟩ + |z+⟩)/√2`.
    pub fn x_plus() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { minus: h, plus: h }
    }
}

impl Default for SpinState {
    fn default() -> Self {
        Self::x_plus()
    }
}

/// Parameters of one dot and its drive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DotParams {
    g: f64,
    lambda: f64,
    omega0: f64,
    initial_spin: SpinState,
}

impl DotParams {
    /// Dot with coupling `g`, drive weight `λ`, initial spin `|x+⟩` and `ω₀ = 0`.
    pub fn new(g: f64, lambda: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(domain(format!("coupling g = {g} must be positive")));
        }
        EprParams::from_lambda(lambda)?;
        Ok(Self {
            g,
            lambda,
            omega0: 0.0,
            initial_spin: SpinState::x_plus(),
        })
    }

    pub fn with_mean(g: f64, m_bar: f64) -> Result<Self> {
        Self::new(g, EprParams::from_mean(m_bar)?.lambda())
    }

    pub fn with_omega0(mut self, omega0: f64) -> Self {
        self.omega0 = omega0;
        self
    }

    pub fn with_spin(mut self, spin: SpinState) -> Self {
        self.initial_spin = spin;
        self
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn initial_spin(&self) -> SpinState {
        self.initial_spin
    }

    pub fn epr(&self) -> EprParams {
        EprParams::from_lambda(self.lambda).expect("validated at construction")
    }
}

/// Basis label of one dot together with its own two photon modes (path-1 slots).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DotKey {
    pub dot: DotLevel,
    pub photons: OccupationTuple,
}

impl BasisKey for DotKey {
    fn photons(&self) -> OccupationTuple {
        self.photons
    }

    fn with_photons(&self, photons: OccupationTuple) -> Self {
        Self { photons, ..*self }
    }
}

/// One dot entangled with the photons it scattered.
pub type DotState = FockState<DotKey>;

/// Initial product state `|spin⟩ ⊗ |photons⟩`.
pub fn product_state(spin: SpinState, photons: &FockState<OccupationTuple>) -> DotState {
    let mut s = DotState::new(photons.frame());
    for (p, a) in photons.iter() {
        for (level, c) in [(DotLevel::Zminus, spin.minus), (DotLevel::Zplus, spin.plus)] {
            if c != Complex64::default() {
                s.add(
                    DotKey {
                        dot: level,
                        photons: *p,
                    },
                    a * c,
                );
            }
        }
    }
    s
}

/// Evolve an arbitrary dot–photon state for time `t` under the resonant interaction.
pub fn evolve(state: &DotState, g: f64, t: f64) -> Result<DotState> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(domain(format!("evolution time t = {t} must be finite and ≥ 0")));
    }
    let mut out = DotState::new(state.frame());
    for (k, &amp) in state.iter() {
        let (a, b) = (k.photons.m_minus(), k.photons.m_plus());
        // (partner level, partner photons, Rabi level) for each of the four labels.
        let (partner, photons, level) = match k.dot {
            DotLevel::Zminus => (DotLevel::Tminus, (a.wrapping_sub(1), b), a),
            DotLevel::Tminus => (DotLevel::Zminus, (a + 1, b), a + 1),
            DotLevel::Zplus => (DotLevel::Tplus, (a, b.wrapping_sub(1)), b),
            DotLevel::Tplus => (DotLevel::Zplus, (a, b + 1), b + 1),
        };
        if level == 0 {
            // No photon to absorb: the spin level is stationary.
            out.add(*k, amp);
            continue;
        }
        let (s, c) = (g * (level as f64).sqrt() * t).sin_cos();
        out.add(*k, amp * c);
        if s != 0.0 {
            let p = OccupationTuple::new(photons.0, photons.1, 0, 0);
            out.add(
                DotKey {
                    dot: partner,
                    photons: p,
                },
                -I * amp * s,
            );
        }
    }
    Ok(out)
}

/// Dot driven by its EPR state, `|spin⟩|χ(0)⟩` evolved to time `t`.
pub fn jc_evolve(p: &DotParams, t: f64, n_max: usize) -> Result<DotState> {
    let initial = product_state(p.initial_spin, &epr_state(p.epr(), n_max));
    evolve(&initial, p.g, t)
}

/// Two dots side by side, dot 2's photons moved to the path-2 slots.
pub fn joint_pre_splitter(p1: &DotParams, p2: &DotParams, t: f64, n_max: usize) -> Result<JointState> {
    let a = jc_evolve(p1, t, n_max)?;
    let b = jc_evolve(p2, t, n_max)?;
    Ok(tensor(&a, &b))
}

/// `|a⟩ ⊗ |b⟩` with `b`'s path-1 photons relabelled as path 2.
pub fn tensor(a: &DotState, b: &DotState) -> JointState {
    let mut out = JointState::new(Frame::PathsAB);
    for (ka, va) in a.iter() {
        for (kb, vb) in b.iter() {
            let photons = OccupationTuple::new(
                ka.photons.m_minus(),
                ka.photons.m_plus(),
                kb.photons.m_minus(),
                kb.photons.m_plus(),
            );
            out.add(JointKey::new(ka.dot, kb.dot, photons), va * vb);
        }
    }
    out
}

/// Eigenvalue of the free Hamiltonian `H₀` on a single dot label plus `photons` photons.
fn free_energy(omega0: f64, dot: DotLevel, photons: u32) -> f64 {
    let level = if dot.is_trion() { 0.5 } else { -0.5 };
    omega0 * (photons as f64 + level)
}

/// Attach the free-evolution phase `e^{−iH₀t}` to an interaction-picture joint state.
///
/// Both dots are assumed to share the resonance frequency `omega0`.
pub fn with_free_phase(s: &JointState, omega0: f64, t: f64) -> JointState {
    JointState::from_entries(
        s.frame(),
        s.iter().map(|(k, a)| {
            let e = free_energy(omega0, k.dot1, 0) + free_energy(omega0, k.dot2, k.photons.total());
            (*k, a * Complex64::from_polar(1.0, -e * t))
        }),
    )
}
