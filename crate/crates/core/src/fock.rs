//! Sparse Fock-space vectors over the four optical modes of the protocol.
//!
//! Modes are labelled by path (1 or 2) and circular polarization (σ− or σ+).
//! Before the beam splitter the paths are `a`/`b`, after it `c`/`d`; a
//! [`Frame`] tag on every state records which pair is meant so that vectors
//! from different sides of the splitter are never mixed.
//!
//! Amplitudes are stored in ordered maps keyed by integer-packed occupation
//! tuples. Ordered storage keeps every reduction (norms, inner products,
//! projections) bit-for-bit reproducible.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};

/// Amplitudes with magnitude below this are dropped by state-producing operations.
pub const DEFAULT_PRUNE: f64 = 1e-14;

/// Default bound on the probability weight discarded by Fock truncation.
pub const DEFAULT_TAIL: f64 = 1e-12;

const FIELD_BITS: u32 = 16;
const FIELD_MASK: u64 = 0xffff;

/// Photon counts `(m−, m+; m̃−, m̃+)`, packed 16 bits per field.
///
/// The first pair belongs to path 1 (`a` or `c`), the second to path 2
/// (`b` or `d`); within a pair σ− comes first.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct OccupationTuple(u64);

impl OccupationTuple {
    pub const VACUUM: Self = Self(0);

    /// Largest count a single mode can hold.
    pub const MAX_COUNT: u32 = FIELD_MASK as u32;

    pub fn new(m_minus: u32, m_plus: u32, mt_minus: u32, mt_plus: u32) -> Self {
        debug_assert!(
            [m_minus, m_plus, mt_minus, mt_plus]
                .iter()
                .all(|&c| c <= Self::MAX_COUNT),
            "mode occupation exceeds packed field width"
        );
        Self(
            (m_minus as u64) << (3 * FIELD_BITS)
                | (m_plus as u64) << (2 * FIELD_BITS)
                | (mt_minus as u64) << FIELD_BITS
                | mt_plus as u64,
        )
    }

    /// Checked constructor that rejects counts above `bound`.
    pub fn bounded(counts: [u32; 4], bound: u32) -> Result<Self> {
        if let Some(c) = counts.iter().find(|&&c| c > bound.min(Self::MAX_COUNT)) {
            return Err(domain(format!("occupation {c} exceeds truncation bound {bound}")));
        }
        Ok(Self::new(counts[0], counts[1], counts[2], counts[3]))
    }

    pub fn from_packed(bits: u64) -> Self {
        Self(bits)
    }

    pub fn packed(self) -> u64 {
        self.0
    }

    pub fn m_minus(self) -> u32 {
        ((self.0 >> (3 * FIELD_BITS)) & FIELD_MASK) as u32
    }

    pub fn m_plus(self) -> u32 {
        ((self.0 >> (2 * FIELD_BITS)) & FIELD_MASK) as u32
    }

    pub fn mt_minus(self) -> u32 {
        ((self.0 >> FIELD_BITS) & FIELD_MASK) as u32
    }

    pub fn mt_plus(self) -> u32 {
        (self.0 & FIELD_MASK) as u32
    }

    pub fn counts(self) -> [u32; 4] {
        [self.m_minus(), self.m_plus(), self.mt_minus(), self.mt_plus()]
    }

    pub fn total(self) -> u32 {
        self.counts().iter().sum()
    }

    /// Photons in path 1 and path 2, summed over polarization.
    pub fn total_per_path(self) -> (u32, u32) {
        (self.m_minus() + self.m_plus(), self.mt_minus() + self.mt_plus())
    }

    /// Photons of polarization σ− and σ+, summed over paths.
    pub fn total_per_polarization(self) -> (u32, u32) {
        (self.m_minus() + self.mt_minus(), self.m_plus() + self.mt_plus())
    }

    /// Exchange path 1 and path 2.
    pub fn swap_paths(self) -> Self {
        Self::new(self.mt_minus(), self.mt_plus(), self.m_minus(), self.m_plus())
    }
}

impl fmt::Debug for OccupationTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.counts();
        write!(f, "|{a},{b};{c},{d}⟩")
    }
}

/// Which side of the beam splitter a state lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Frame {
    /// Input paths `a` (dot 1) and `b` (dot 2).
    PathsAB,
    /// Output paths `c` (detector 1) and `d` (detector 2).
    PathsCD,
}

/// The four levels of a singly charged dot in the Faraday geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DotLevel {
    Zminus,
    Zplus,
    Tminus,
    Tplus,
}

impl DotLevel {
    pub const ALL: [DotLevel; 4] = [DotLevel::Zminus, DotLevel::Zplus, DotLevel::Tminus, DotLevel::Tplus];

    pub fn is_trion(self) -> bool {
        matches!(self, DotLevel::Tminus | DotLevel::Tplus)
    }

    pub fn is_spin(self) -> bool {
        !self.is_trion()
    }

    /// Position within its own two-level sector: 0 for the σ− level, 1 for σ+.
    pub fn sector_index(self) -> usize {
        match self {
            DotLevel::Zminus | DotLevel::Tminus => 0,
            DotLevel::Zplus | DotLevel::Tplus => 1,
        }
    }
}

/// Basis labels that carry an occupation tuple.
pub trait BasisKey: Copy + Ord + fmt::Debug {
    fn photons(&self) -> OccupationTuple;
    fn with_photons(&self, photons: OccupationTuple) -> Self;
}

impl BasisKey for OccupationTuple {
    fn photons(&self) -> OccupationTuple {
        *self
    }

    fn with_photons(&self, photons: OccupationTuple) -> Self {
        photons
    }
}

/// Basis label of the joint dot–dot–photon space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointKey {
    pub dot1: DotLevel,
    pub dot2: DotLevel,
    pub photons: OccupationTuple,
}

impl JointKey {
    pub fn new(dot1: DotLevel, dot2: DotLevel, photons: OccupationTuple) -> Self {
        Self { dot1, dot2, photons }
    }
}

impl BasisKey for JointKey {
    fn photons(&self) -> OccupationTuple {
        self.photons
    }

    fn with_photons(&self, photons: OccupationTuple) -> Self {
        Self { photons, ..*self }
    }
}

/// Sparse state vector over basis labels `K`.
#[derive(Clone, PartialEq)]
pub struct FockState<K> {
    frame: Frame,
    amps: BTreeMap<K, Complex64>,
}

/// Photon-only state of the four modes.
pub type PhotonVector = FockState<OccupationTuple>;

/// State of both dots together with the four photon modes.
pub type JointState = FockState<JointKey>;

impl<K: BasisKey> FockState<K> {
    pub fn new(frame: Frame) -> Self {
        Self {
            frame,
            amps: BTreeMap::new(),
        }
    }

    pub fn basis(frame: Frame, key: K) -> Self {
        let mut s = Self::new(frame);
        s.add(key, Complex64::new(1.0, 0.0));
        s
    }

    pub fn from_entries(frame: Frame, entries: impl IntoIterator<Item = (K, Complex64)>) -> Self {
        let mut s = Self::new(frame);
        for (k, a) in entries {
            s.add(k, a);
        }
        s
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitude(&self, key: &K) -> Complex64 {
        self.amps.get(key).copied().unwrap_or_default()
    }

    /// Accumulate `amp` onto `key`.
    pub fn add(&mut self, key: K, amp: Complex64) {
        *self.amps.entry(key).or_default() += amp;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &Complex64)> {
        self.amps.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.amps.keys()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().fold(0.0, |acc, a| acc + a.norm_sqr())
    }

    pub fn scale(&mut self, factor: Complex64) {
        for a in self.amps.values_mut() {
            *a *= factor;
        }
    }

    /// Drop amplitudes with magnitude below `threshold`; returns how many were removed.
    pub fn prune(&mut self, threshold: f64) -> usize {
        let before = self.amps.len();
        self.amps.retain(|_, a| a.norm() >= threshold);
        before - self.amps.len()
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.frame != other.frame {
            return Err(Error::FrameMismatch {
                expected: self.frame,
                found: other.frame,
            });
        }
        let (small, large, conj_small) = if self.len() <= other.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, a) in &small.amps {
            if let Some(b) = large.amps.get(k) {
                acc += if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        Ok(acc)
    }

    /// Sub-vector of the entries whose label satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&K) -> bool) -> Self {
        Self {
            frame: self.frame,
            amps: self
                .amps
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, a)| (*k, *a))
                .collect(),
        }
    }

    /// Component with exactly `total` photons.
    pub fn photon_block(&self, total: u32) -> Self {
        self.filter(|k| k.photons().total() == total)
    }

    /// Split into components of fixed total photon number.
    pub fn photon_blocks(&self) -> BTreeMap<u32, Self> {
        let mut blocks: BTreeMap<u32, Self> = BTreeMap::new();
        for (k, a) in &self.amps {
            blocks
                .entry(k.photons().total())
                .or_insert_with(|| Self::new(self.frame))
                .amps
                .insert(*k, *a);
        }
        blocks
    }

    /// Apply `f` to every photon label, accumulating collisions.
    pub fn map_photons(&self, mut f: impl FnMut(OccupationTuple) -> (OccupationTuple, Complex64)) -> Self {
        let mut out = Self::new(self.frame);
        for (k, a) in &self.amps {
            let (p, phase) = f(k.photons());
            out.add(k.with_photons(p), a * phase);
        }
        out
    }

    pub(crate) fn into_entries(self) -> impl Iterator<Item = (K, Complex64)> {
        self.amps.into_iter()
    }
}

impl<K: BasisKey> fmt::Debug for FockState<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FockState")
            .field("frame", &self.frame)
            .field("amps", &self.amps)
            .finish()
    }
}

/// `⟨x|y⟩` for two states of the same kind and frame.
pub fn inner_product<K: BasisKey>(x: &FockState<K>, y: &FockState<K>) -> Result<Complex64> {
    x.inner(y)
}

impl PhotonVector {
    pub fn vacuum(frame: Frame) -> Self {
        Self::basis(frame, OccupationTuple::VACUUM)
    }
}

impl JointState {
    /// Sub-vector whose dot-label pair satisfies `keep`.
    pub fn sector_filter(&self, keep: impl Fn(DotLevel, DotLevel) -> bool) -> Self {
        self.filter(|k| keep(k.dot1, k.dot2))
    }

    /// Squared norm of the component with dot labels `(dot1, dot2)`.
    pub fn sector_weight(&self, dot1: DotLevel, dot2: DotLevel) -> f64 {
        self.iter()
            .filter(|(k, _)| k.dot1 == dot1 && k.dot2 == dot2)
            .fold(0.0, |acc, (_, a)| acc + a.norm_sqr())
    }

    /// Photon vector multiplying the dot pair `(dot1, dot2)`.
    pub fn photon_component(&self, dot1: DotLevel, dot2: DotLevel) -> PhotonVector {
        PhotonVector::from_entries(
            self.frame(),
            self.iter()
                .filter(|(k, _)| k.dot1 == dot1 && k.dot2 == dot2)
                .map(|(k, a)| (k.photons, *a)),
        )
    }
}

/// Free-function form of [`JointState::sector_filter`].
pub fn sector_filter(s: &JointState, keep: impl Fn(DotLevel, DotLevel) -> bool) -> JointState {
    s.sector_filter(keep)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(domain(format!("squeeze weight λ = {lambda} must lie in [0, 1)")));
    }
    Ok(())
}

/// Probability weight of the `|m,m⟩` terms with `m > n_max` in an EPR state, `λ^{2(n_max+1)}`.
pub fn truncation_tail_bound(lambda: f64, n_max: usize) -> Result<f64> {
    check_lambda(lambda)?;
    Ok((lambda * lambda).powi(n_max as i32 + 1))
}

/// Smallest-form truncation `N = ⌈ln ε / (2 ln λ)⌉`, which keeps the discarded weight ≤ `eps`.
pub fn truncation_for_tail(lambda: f64, eps: f64) -> Result<usize> {
    check_lambda(lambda)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("tail tolerance {eps} must lie in (0, 1)")));
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    Ok((eps.ln() / (2.0 * lambda.ln())).ceil().max(0.0) as usize)
}
