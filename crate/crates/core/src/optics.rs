//! Balanced beam splitter and polarization-blind photon counting.
//!
//! The splitter maps `c = (a+b)/√2`, `d = (b−a)/√2`. It acts on each
//! polarization separately, so a four-mode state transforms through the
//! one-mode element `E_n[k][l] = ⟨k, n−k|U|l, n−l⟩` applied to the σ− and σ+
//! channels independently.
//!
//! `E_n[k][l]` is `√(k!(n−k)!/(l!(n−l)!)) 2^{−n/2} S_n(k,l)` with the alternating
//! integer sum `S_n(k,l) = Σ_q C(l,q) C(n−l,k−q) (−1)^{l+q}`. The sum cancels
//! catastrophically in floating point, so it is evaluated in exact integer
//! arithmetic and only then combined with the factorials in log space.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{usage, Error, Result};
use crate::fock::{BasisKey, FockState, Frame, JointState, OccupationTuple, DEFAULT_PRUNE};

const LN_FACTORIAL_LEN: usize = 1 << 16;

/// `ln n!`, tabulated once with compensated summation.
pub fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_LEN);
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        t.push(0.0);
        for i in 1..LN_FACTORIAL_LEN {
            // Neumaier summation keeps the table accurate to the last ulp.
            let v = (i as f64).ln();
            let s = sum + v;
            comp += if sum.abs() >= v.abs() {
                (sum - s) + v
            } else {
                (v - s) + sum
            };
            sum = s;
            t.push(sum + comp);
        }
        t
    });
    assert!(n < LN_FACTORIAL_LEN, "ln_factorial table exceeded at n = {n}");
    table[n]
}

fn ln_abs_bigint(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.abs().to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (x.abs() >> shift).to_f64().expect("64-bit mantissa");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Combine the exact integer sum with the factorial prefactor.
fn scale_element(n: usize, k: usize, l: usize, s: &BigInt) -> f64 {
    if s.is_zero() {
        return 0.0;
    }
    let ln_mag = 0.5 * (ln_factorial(k) + ln_factorial(n - k) - ln_factorial(l) - ln_factorial(n - l))
        - 0.5 * n as f64 * std::f64::consts::LN_2
        + ln_abs_bigint(s);
    let mag = ln_mag.exp();
    if s.is_negative() {
        -mag
    } else {
        mag
    }
}

fn binomial_row(n: usize) -> Vec<BigInt> {
    let mut row = Vec::with_capacity(n + 1);
    let mut c = BigInt::from(1u32);
    row.push(c.clone());
    for q in 0..n {
        c = c * BigInt::from(n - q) / BigInt::from(q + 1);
        row.push(c.clone());
    }
    row
}

/// `S_n(k,l)` by its defining double binomial sum.
pub fn kravchuk_sum(n: usize, k: usize, l: usize) -> BigInt {
    let cl = binomial_row(l);
    let cr = binomial_row(n - l);
    let mut s = BigInt::zero();
    for q in k.saturating_sub(n - l)..=k.min(l) {
        let term = &cl[q] * &cr[k - q];
        if (l + q) % 2 == 0 {
            s += term;
        } else {
            s -= term;
        }
    }
    s
}

/// `⟨k, n−k|U|l, n−l⟩` for one polarization, from the direct integer sum.
pub fn bs_element(n: usize, k: usize, l: usize) -> Result<f64> {
    if k > n || l > n {
        return Err(usage(format!("beam-splitter index (n={n}, k={k}, l={l}) out of range")));
    }
    Ok(scale_element(n, k, l, &kravchuk_sum(n, k, l)))
}

/// All one-mode elements `E_n[k][l]` for a fixed photon number `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct BsElementTable {
    n: usize,
    data: Vec<f64>,
}

impl BsElementTable {
    /// Build from the column recurrence of the generating polynomials
    /// `P_l(x) = (−1)^l (1−x)^l (1+x)^{n−l} = Σ_k S_n(k,l) x^k`,
    /// `P_{l+1}[k] = P_l[k−1] − P_l[k] − P_{l+1}[k−1]`, all in exact integers.
    ///
    /// Only columns `l ≤ n/2` are generated; the rest follow from
    /// `S_n(k, n−l) = (−1)^{n+k} S_n(k, l)`.
    pub fn build(n: usize) -> Self {
        let dim = n + 1;
        let mut data = vec![0.0; dim * dim];
        let mut cur = binomial_row(n);
        let mut next: Vec<BigInt> = vec![BigInt::zero(); dim];
        let half = n / 2;
        for l in 0..=half {
            for (k, s) in cur.iter().enumerate() {
                let v = scale_element(n, k, l, s);
                data[k * dim + l] = v;
                data[k * dim + (n - l)] = if (n + k) % 2 == 0 { v } else { -v };
            }
            if l == half {
                break;
            }
            next[0].clone_from(&cur[0]);
            next[0] = -std::mem::take(&mut next[0]);
            for k in 1..dim {
                let (done, rest) = next.split_at_mut(k);
                let slot = &mut rest[0];
                slot.clone_from(&cur[k - 1]);
                *slot -= &cur[k];
                *slot -= &done[k - 1];
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `E_n[k][l]`; panics on out-of-range indices.
    #[inline]
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.data[k * (self.n + 1) + l]
    }

    /// Row `k` as a slice over `l`.
    pub fn row(&self, k: usize) -> &[f64] {
        let dim = self.n + 1;
        &self.data[k * dim..(k + 1) * dim]
    }
}

/// Tables above this size are built on demand and not retained.
pub const CACHE_LIMIT: usize = 256;

/// Shared read-only element table for `n`, memoized for `n ≤ CACHE_LIMIT`.
pub fn element_table(n: usize) -> Arc<BsElementTable> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<BsElementTable>>>> = OnceLock::new();
    if n > CACHE_LIMIT {
        return Arc::new(BsElementTable::build(n));
    }
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().expect("table cache poisoned").get(&n) {
        return Arc::clone(t);
    }
    // Built outside the lock; a concurrent duplicate build is harmless.
    let table = Arc::new(BsElementTable::build(n));
    cache
        .lock()
        .expect("table cache poisoned")
        .entry(n)
        .or_insert(table)
        .clone()
}

fn require_frame<K: BasisKey>(s: &FockState<K>, frame: Frame) -> Result<()> {
    if s.frame() != frame {
        return Err(Error::FrameMismatch {
            expected: frame,
            found: s.frame(),
        });
    }
    Ok(())
}

/// Apply the splitter to a state in the `a`/`b` frame, pruning at [`DEFAULT_PRUNE`].
pub fn bs_transform<K: BasisKey>(s: &FockState<K>) -> Result<FockState<K>> {
    bs_transform_pruned(s, DEFAULT_PRUNE)
}

/// [`bs_transform`] with an explicit prune threshold.
pub fn bs_transform_pruned<K: BasisKey>(s: &FockState<K>, prune: f64) -> Result<FockState<K>> {
    require_frame(s, Frame::PathsAB)?;
    // Group by (non-photon label, σ− total, σ+ total); each group is one dense block.
    let mut groups: BTreeMap<(K, u32, u32), Vec<(u32, u32, Complex64)>> = BTreeMap::new();
    for (k, a) in s.iter() {
        let p = k.photons();
        let (nm, np) = p.total_per_polarization();
        groups
            .entry((k.with_photons(OccupationTuple::VACUUM), nm, np))
            .or_default()
            .push((p.m_minus(), p.m_plus(), *a));
    }
    let mut out = FockState::new(Frame::PathsCD);
    for ((label, nm, np), entries) in groups {
        transform_group(nm as usize, np as usize, &entries, prune, |p, a| {
            out.add(label.with_photons(p), a)
        });
    }
    Ok(out)
}

/// Transform one `(n−, n+)` block given as `(l−, l+, amplitude)` entries.
fn transform_group(
    nm: usize,
    np: usize,
    entries: &[(u32, u32, Complex64)],
    prune: f64,
    mut emit: impl FnMut(OccupationTuple, Complex64),
) {
    let em = element_table(nm);
    let ep = element_table(np);
    // Half-transform over σ−: y[k−][l+] = Σ_{l−} E−[k−][l−] x[l−][l+].
    let mut lps: Vec<usize> = entries.iter().map(|e| e.1 as usize).collect();
    lps.sort_unstable();
    lps.dedup();
    let width = lps.len();
    let mut y = vec![Complex64::default(); (nm + 1) * width];
    for &(lm, lp, a) in entries {
        let col = lps.binary_search(&(lp as usize)).expect("collected above");
        for km in 0..=nm {
            y[km * width + col] += a * em.get(km, lm as usize);
        }
    }
    for km in 0..=nm {
        let yrow = &y[km * width..(km + 1) * width];
        if yrow.iter().all(|v| v.norm_sqr() == 0.0) {
            continue;
        }
        for kp in 0..=np {
            let erow = ep.row(kp);
            let mut acc = Complex64::default();
            for (c, &lp) in lps.iter().enumerate() {
                acc += yrow[c] * erow[lp];
            }
            if acc.norm() >= prune {
                let p = OccupationTuple::new(km as u32, kp as u32, (nm - km) as u32, (np - kp) as u32);
                emit(p, acc);
            }
        }
    }
}

/// Keep the amplitudes with `n1` photons in path `c` and `n2` in path `d`.
pub fn project_count<K: BasisKey>(s: &FockState<K>, n1: u32, n2: u32) -> Result<FockState<K>> {
    require_frame(s, Frame::PathsCD)?;
    Ok(s.filter(|k| k.photons().total_per_path() == (n1, n2)))
}

/// `‖P_{n1,n2} s‖²`.
pub fn outcome_probability<K: BasisKey>(s: &FockState<K>, n1: u32, n2: u32) -> Result<f64> {
    Ok(project_count(s, n1, n2)?.norm_sqr())
}

/// Probabilities of every count pair with nonzero weight.
pub fn outcome_distribution<K: BasisKey>(s: &FockState<K>) -> Result<BTreeMap<(u32, u32), f64>> {
    require_frame(s, Frame::PathsCD)?;
    let mut dist = BTreeMap::new();
    for (k, a) in s.iter() {
        *dist.entry(k.photons().total_per_path()).or_insert(0.0) += a.norm_sqr();
    }
    Ok(dist)
}

/// Post-measurement states for every outcome with `n1 + n2 = total`.
///
/// Only the input block with `total` photons is transformed, which keeps
/// sweeps over many outcomes linear in the number of blocks.
pub fn outcome_states_for_total(pre: &JointState, total: u32) -> Result<BTreeMap<(u32, u32), JointState>> {
    require_frame(pre, Frame::PathsAB)?;
    let block = pre.photon_block(total);
    let post = bs_transform(&block)?;
    let mut out: BTreeMap<(u32, u32), JointState> = BTreeMap::new();
    for (k, a) in post.into_entries() {
        out.entry(k.photons.total_per_path())
            .or_insert_with(|| JointState::new(Frame::PathsCD))
            .add(k, a);
    }
    Ok(out)
}

/// Outcome probabilities of a pre-splitter state, block by block.
#[derive(Clone, Debug)]
pub struct OutcomeTable {
    pub probabilities: BTreeMap<(u32, u32), f64>,
    /// Total probability of the blocks that were transformed.
    pub covered: f64,
    /// Norm² of the input state.
    pub norm_sqr: f64,
}

/// Transform blocks in increasing photon number until the untransformed mass is below `tail`.
pub fn outcome_table(pre: &JointState, tail: f64) -> Result<OutcomeTable> {
    require_frame(pre, Frame::PathsAB)?;
    let blocks = pre.photon_blocks();
    let norm_sqr = pre.norm_sqr();
    let mut covered = 0.0;
    let mut probabilities = BTreeMap::new();
    for block in blocks.values() {
        if norm_sqr - covered <= tail {
            break;
        }
        for (k, v) in outcome_distribution(&bs_transform(block)?)? {
            *probabilities.entry(k).or_insert(0.0) += v;
        }
        covered += block.norm_sqr();
    }
    Ok(OutcomeTable {
        probabilities,
        covered,
        norm_sqr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{joint_pre_splitter, DotParams};
    use crate::fock::{DotLevel, JointKey, PhotonVector};
    use approx::assert_relative_eq;
    use num_traits::One;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn element_examples() {
        assert_relative_eq!(bs_element(1, 1, 1).unwrap(), FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_eq!(bs_element(2, 1, 1).unwrap(), 0.0);
        assert_relative_eq!(bs_element(2, 2, 1).unwrap(), FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_relative_eq!(bs_element(1, 0, 1).unwrap(), -FRAC_1_SQRT_2, epsilon = 1e-15);
        assert!(matches!(bs_element(2, 3, 0), Err(Error::Usage(_))));
    }

    #[test]
    fn recurrence_matches_direct_sum() {
        for n in [0usize, 1, 2, 5, 17, 40, 90] {
            let t = BsElementTable::build(n);
            for k in 0..=n {
                for l in 0..=n {
                    let d = bs_element(n, k, l).unwrap();
                    assert!((t.get(k, l) - d).abs() <= 1e-13 * d.abs(), "n={n} k={k} l={l}");
                }
            }
        }
    }

    #[test]
    fn exact_integer_orthogonality() {
        // Σ_k S(k,l) S(k,l') k!(n−k)! = δ_{ll'} 2^n l!(n−l)!, in exact arithmetic.
        let fact = |n: usize| -> BigInt { (1..=n).fold(BigInt::one(), |a, i| a * BigInt::from(i)) };
        for n in [1usize, 4, 9, 23, 60] {
            let s: Vec<Vec<BigInt>> = (0..=n)
                .map(|k| (0..=n).map(|l| kravchuk_sum(n, k, l)).collect())
                .collect();
            let w: Vec<BigInt> = (0..=n).map(|k| fact(k) * fact(n - k)).collect();
            for l in 0..=n {
                for lp in l..=n {
                    let sum: BigInt = (0..=n).map(|k| &s[k][l] * &s[k][lp] * &w[k]).sum();
                    let expect = if l == lp {
                        (BigInt::one() << n) * fact(l) * fact(n - l)
                    } else {
                        BigInt::zero()
                    };
                    assert_eq!(sum, expect, "n={n} l={l} l'={lp}");
                }
            }
        }
    }

    #[test]
    fn float_orthogonality() {
        for n in [3usize, 50, 150] {
            let t = BsElementTable::build(n);
            for l in 0..=n {
                for lp in 0..=n {
                    let dot: f64 = (0..=n).map(|k| t.get(k, l) * t.get(k, lp)).sum();
                    let expect = if l == lp { 1.0 } else { 0.0 };
                    assert!((dot - expect).abs() < 1e-10, "n={n} l={l} l'={lp} dot={dot}");
                }
            }
        }
    }

    #[test]
    fn transform_examples() {
        let vac = PhotonVector::vacuum(Frame::PathsAB);
        assert_eq!(bs_transform(&vac).unwrap(), PhotonVector::vacuum(Frame::PathsCD));

        let one = PhotonVector::basis(Frame::PathsAB, OccupationTuple::new(1, 0, 0, 0));
        let out = bs_transform(&one).unwrap();
        assert_eq!(out.len(), 2);
        assert_relative_eq!(
            out.amplitude(&OccupationTuple::new(1, 0, 0, 0)).re,
            FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            out.amplitude(&OccupationTuple::new(0, 0, 1, 0)).re,
            -FRAC_1_SQRT_2,
            epsilon = 1e-15
        );

        let hom = bs_transform(&PhotonVector::basis(Frame::PathsAB, OccupationTuple::new(1, 0, 1, 0))).unwrap();
        assert_eq!(hom.len(), 2);
        assert_relative_eq!(
            hom.amplitude(&OccupationTuple::new(2, 0, 0, 0)).re,
            FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            hom.amplitude(&OccupationTuple::new(0, 0, 2, 0)).re,
            -FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert_eq!(hom.amplitude(&OccupationTuple::new(1, 0, 1, 0)), Complex64::default());

        assert!(matches!(bs_transform(&hom), Err(Error::FrameMismatch { .. })));
    }

    #[test]
    fn projection_examples() {
        let vac = PhotonVector::vacuum(Frame::PathsCD);
        assert_eq!(outcome_probability(&vac, 0, 0).unwrap(), 1.0);
        assert!(project_count(&vac, 1, 0).unwrap().is_empty());
        let hom = bs_transform(&PhotonVector::basis(Frame::PathsAB, OccupationTuple::new(1, 0, 1, 0))).unwrap();
        let p = project_count(&hom, 2, 0).unwrap();
        assert_eq!(p.len(), 1);
        assert_relative_eq!(p.norm_sqr(), 0.5, epsilon = 1e-15);
        assert!(project_count(&PhotonVector::vacuum(Frame::PathsAB), 0, 0).is_err());
    }

    #[test]
    fn pipeline_is_complete_and_symmetric() {
        let p = DotParams::with_mean(1.0, 1.0).unwrap();
        let n = 60;
        let pre = joint_pre_splitter(&p, &p, 3.7, n).unwrap();
        let table = outcome_table(&pre, 0.0).unwrap();
        let total: f64 = table.probabilities.values().sum();
        let kept = 1.0 - 0.5f64.powi(n as i32 + 1);
        assert!((total - kept * kept).abs() < 1e-12);
        let pr = |a, b| table.probabilities.get(&(a, b)).copied().unwrap_or(0.0);
        assert!((pr(1, 3) - pr(3, 1)).abs() < 1e-12);
        assert!(pr(1, 3) > 1e-4);
    }

    #[test]
    fn same_polarization_holes_never_split_odd() {
        let p = DotParams::with_mean(1.0, 2.0).unwrap();
        let pre = joint_pre_splitter(&p, &p, 5.1, 40).unwrap();
        let holes = pre.sector_filter(|a, b| a == DotLevel::Tminus && b == DotLevel::Tminus);
        let post = bs_transform(&holes).unwrap();
        for ((n1, n2), prob) in outcome_distribution(&post).unwrap() {
            if n1 % 2 == 1 && n2 % 2 == 1 {
                assert!(prob < 1e-12, "({n1},{n2}) carries {prob}");
            }
        }
    }

    fn sparse_state() -> impl Strategy<Value = Vec<([u32; 4], f64, f64)>> {
        prop::collection::vec(
            ([0u32..5, 0u32..5, 0u32..5, 0u32..5], -1.0..1.0f64, -1.0..1.0f64),
            1..12,
        )
    }

    fn build(entries: &[([u32; 4], f64, f64)]) -> PhotonVector {
        PhotonVector::from_entries(
            Frame::PathsAB,
            entries
                .iter()
                .map(|(o, re, im)| (OccupationTuple::new(o[0], o[1], o[2], o[3]), Complex64::new(*re, *im))),
        )
    }

    proptest! {
        #[test]
        fn transform_is_unitary_and_conserving(entries in sparse_state()) {
            let s = build(&entries);
            let out = bs_transform_pruned(&s, 0.0).unwrap();
            prop_assert!((out.norm_sqr() - s.norm_sqr()).abs() < 1e-12);
            let totals = |v: &PhotonVector| -> BTreeMap<(u32, u32), f64> {
                let mut m = BTreeMap::new();
                for (k, a) in v.iter() {
                    *m.entry(k.total_per_polarization()).or_insert(0.0) += a.norm_sqr();
                }
                m
            };
            let (ti, to) = (totals(&s), totals(&out));
            prop_assert_eq!(ti.len(), to.len());
            for (k, w) in ti {
                prop_assert!((to[&k] - w).abs() < 1e-12);
            }
            let dist: f64 = outcome_distribution(&out).unwrap().values().sum();
            prop_assert!((dist - s.norm_sqr()).abs() < 1e-12);
        }

        #[test]
        fn path_swap_negates_path_d(entries in sparse_state()) {
            let s = build(&entries);
            let swapped = s.map_photons(|p| (p.swap_paths(), c(1.0)));
            let lhs = bs_transform_pruned(&swapped, 0.0).unwrap();
            let rhs = bs_transform_pruned(&s, 0.0).unwrap()
                .map_photons(|p| (p, c(if p.total_per_path().1 % 2 == 0 { 1.0 } else { -1.0 })));
            for (k, v) in rhs.iter() {
                prop_assert!((lhs.amplitude(k) - v).norm() < 1e-12);
            }
            for (k, v) in lhs.iter() {
                prop_assert!((rhs.amplitude(k) - v).norm() < 1e-12);
            }
        }

        #[test]
        fn joint_labels_ride_along(entries in sparse_state()) {
            let s = build(&entries);
            let joint = JointState::from_entries(
                Frame::PathsAB,
                s.iter().map(|(k, a)| (JointKey::new(DotLevel::Tminus, DotLevel::Zplus, *k), *a)),
            );
            let a = bs_transform(&s).unwrap();
            let b = bs_transform(&joint).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (k, v) in b.iter() {
                prop_assert_eq!((k.dot1, k.dot2), (DotLevel::Tminus, DotLevel::Zplus));
                prop_assert_eq!(a.amplitude(&k.photons), *v);
            }
        }
    }
}
