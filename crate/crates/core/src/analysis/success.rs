//! Success probabilities of the odd-odd herald, ideal and lossy.
//!
//! With `ε = 1 − η`, one odd-odd shell `n3` contributes
//! `f(n3) W(n3, ε)` where `W = Σ_{odd n1} C(n1, n2) (1−ε^{n1})(1−ε^{n2})`.
//! Up to the cached table `W` is summed directly. Beyond it, the generating
//! polynomials of the one-mode elements give `W` in `O(n3²)` without forming
//! the coefficients: `Σ_{n1} C z^{n1}` is a sum of products of two
//! polynomials in `z`, and the odd part follows from `z ↦ −z`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{usage, Result};
use crate::optics::BsElementTable;

use super::coefficients::{check_mean, check_odd, d_sum, edge_coefficient, f_weight, CCoefficientTable};
use super::detector::DetectorModel;
use super::grid::{Parity, ProbabilityGrid};
use super::rooftop::RooftopModel;

/// Tail bound targeted by adaptive truncation when shells beyond the table are expensive.
pub const EXACT_TAIL: f64 = 1e-8;

/// Tail bound used where extra shells are cheap (closed forms, cached table, `η = 1`).
pub const TIGHT_TAIL: f64 = 1e-12;

/// `ζ` of a single-photon heralding scheme, for comparison.
pub const SINGLE_PHOTON_ZETA: f64 = 0.125;

/// Table size behind [`SuccessModel::standard`].
pub const STANDARD_N3_MAX: usize = 300;

/// How the shell sum over `n3` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuccessMethod {
    /// Exact coefficients up to `n3_limit`, or up to where the tail bound drops below [`EXACT_TAIL`].
    ExactTruncated(Option<usize>),
    /// Rooftop model for every shell.
    Rooftop,
    /// Exact coefficients for `n3 ≤ n3_max`, rooftop beyond.
    Hybrid(usize),
}

impl Default for SuccessMethod {
    fn default() -> Self {
        SuccessMethod::Hybrid(STANDARD_N3_MAX)
    }
}

/// A truncated sum together with a bound on what was left out.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuccessValue {
    pub value: f64,
    pub tail_bound: f64,
    /// Last shell included.
    pub n3_limit: usize,
}

/// Time-averaged probability of an odd-odd outcome, `C f`.
pub fn prob_avg(n1: usize, n2: usize, m_bar: f64) -> Result<f64> {
    let n3 = check_odd(n1, n2)?;
    check_mean(m_bar)?;
    Ok(super::coefficients::c_coefficient(n1, n2)? * f_weight(n3, m_bar))
}

/// Closed-form success probability for ideal detectors.
pub fn prob_succ_ideal(m_bar: f64) -> Result<f64> {
    check_mean(m_bar)?;
    let x = m_bar / (m_bar + 1.0);
    Ok((4.0 * m_bar + 3.0) / (2.0 * m_bar + 1.0) * x * x / 32.0)
}

/// Bound on `Σ_{n3>L} (n3+2)/16 · f(n3)`, which dominates every neglected shell.
pub fn shell_tail_bound(m_bar: f64, l: usize) -> f64 {
    if m_bar == 0.0 {
        return 0.0;
    }
    let x = m_bar / (m_bar + 1.0);
    let j = (l + 2) as f64;
    (j * x.ln()).exp() * (j / (m_bar + 1.0) + 1.0) / 16.0
}

/// Smallest `L` whose [`shell_tail_bound`] is at most `tol`.
pub fn shells_for_tail(m_bar: f64, tol: f64) -> usize {
    if shell_tail_bound(m_bar, 1) <= tol {
        return 1;
    }
    let mut hi = 2;
    while shell_tail_bound(m_bar, hi) > tol {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if shell_tail_bound(m_bar, mid) > tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Ideal-detector success probability by direct summation of `D(n3) f(n3)`.
///
/// The tail is bounded relative to the first shell, so the relative error is
/// at most `rel_tol` for every `m̄ > 0`.
pub fn prob_succ_series(m_bar: f64, rel_tol: f64) -> Result<SuccessValue> {
    check_mean(m_bar)?;
    let n3_limit = shells_for_tail(m_bar, rel_tol * d_sum(1) * f_weight(1, m_bar));
    let value = shell_sum(m_bar, n3_limit, d_sum);
    Ok(SuccessValue {
        value,
        tail_bound: shell_tail_bound(m_bar, n3_limit),
        n3_limit,
    })
}

/// `Σ_{n3=1}^{limit} f(n3) w(n3)`, with `f` updated multiplicatively.
fn shell_sum(m_bar: f64, limit: usize, mut w: impl FnMut(usize) -> f64) -> f64 {
    let x = m_bar / (m_bar + 1.0);
    let mut f = f_weight(1, m_bar);
    let mut acc = 0.0;
    for n3 in 1..=limit {
        if f == 0.0 {
            break;
        }
        acc += f * w(n3);
        f *= x;
    }
    acc
}

/// Exact coefficients plus the rooftop model, with cached kernels beyond the table.
pub struct SuccessModel {
    table: Arc<CCoefficientTable>,
    rooftop: RooftopModel,
    /// `W(n3, ε)` for `n3 > table.n3_max()`, keyed by the bits of `ε`.
    kernels: Mutex<HashMap<u64, Vec<f64>>>,
}

impl std::fmt::Debug for SuccessModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SuccessModel")
            .field("n3_max", &self.table.n3_max())
            .field("rooftop", &self.rooftop)
            .finish()
    }
}

impl SuccessModel {
    pub fn new(table: Arc<CCoefficientTable>, rooftop: RooftopModel) -> Self {
        Self {
            table,
            rooftop,
            kernels: Mutex::new(HashMap::new()),
        }
    }

    /// Shared model over a freshly built `n3 ≤ 300` table and the frozen rooftop constants.
    pub fn standard() -> &'static SuccessModel {
        static MODEL: OnceLock<SuccessModel> = OnceLock::new();
        MODEL.get_or_init(|| {
            SuccessModel::new(
                Arc::new(CCoefficientTable::build(STANDARD_N3_MAX)),
                RooftopModel::default(),
            )
        })
    }

    pub fn table(&self) -> &CCoefficientTable {
        &self.table
    }

    pub fn rooftop(&self) -> &RooftopModel {
        &self.rooftop
    }

    /// Exact `W(n3, ε)`.
    pub fn weighted_exact(&self, n3: usize, d: &DetectorModel) -> f64 {
        if d.eta() == 1.0 {
            return self.table.row_sum(n3).unwrap_or_else(|| d_sum(n3));
        }
        if let Some(row) = self.table.row(n3) {
            return row
                .iter()
                .enumerate()
                .map(|(i, c)| c * d.click(2 * i + 1) * d.click(2 * n3 - 2 * i - 1))
                .sum();
        }
        self.prepare(&[*d], n3);
        let key = d.loss().to_bits();
        self.kernels.lock().expect("kernel cache poisoned")[&key][n3 - self.table.n3_max() - 1]
    }

    /// Precompute `W(n3, ε)` beyond the table for several detectors at once.
    pub fn prepare(&self, detectors: &[DetectorModel], n3_limit: usize) {
        let base = self.table.n3_max();
        let mut cache = self.kernels.lock().expect("kernel cache poisoned");
        let mut wanted: Vec<(u64, f64)> = detectors
            .iter()
            .filter(|d| d.eta() < 1.0)
            .map(|d| (d.loss().to_bits(), d.loss()))
            .collect();
        wanted.sort_by_key(|w| w.0);
        wanted.dedup_by_key(|w| w.0);
        let start = wanted
            .iter()
            .map(|(k, _)| base + 1 + cache.get(k).map_or(0, Vec::len))
            .min();
        let Some(start) = start else { return };
        for n3 in start..=n3_limit {
            let eps: Vec<f64> = wanted
                .iter()
                .filter(|(k, _)| base + 1 + cache.get(k).map_or(0, Vec::len) == n3)
                .map(|w| w.1)
                .collect();
            if eps.is_empty() {
                continue;
            }
            let w = gf_weighted(&BsElementTable::build(n3), &eps);
            for (e, v) in eps.iter().zip(w) {
                cache.entry(e.to_bits()).or_default().push(v);
            }
        }
    }

    /// Lossy success probability by the chosen method, with a bound on the neglected shells.
    pub fn prob_succ(&self, m_bar: f64, d: &DetectorModel, method: SuccessMethod) -> Result<SuccessValue> {
        check_mean(m_bar)?;
        let tight = shells_for_tail(m_bar, TIGHT_TAIL);
        let cheap = d.eta() == 1.0 || tight <= self.table.n3_max() || method != SuccessMethod::ExactTruncated(None);
        let adaptive = if cheap {
            tight
        } else {
            shells_for_tail(m_bar, EXACT_TAIL)
        };
        let (limit, exact_upto) = match method {
            SuccessMethod::ExactTruncated(l) => {
                let l = l.unwrap_or(adaptive);
                (l, l)
            }
            SuccessMethod::Rooftop => (adaptive, 0),
            SuccessMethod::Hybrid(n3_max) => {
                if n3_max > self.table.n3_max() {
                    return Err(usage(format!(
                        "hybrid n3_max = {n3_max} exceeds the coefficient table ({})",
                        self.table.n3_max()
                    )));
                }
                (adaptive, n3_max)
            }
        };
        if exact_upto.min(limit) > self.table.n3_max() {
            self.prepare(&[*d], exact_upto.min(limit));
        }
        let value = shell_sum(m_bar, limit, |n3| {
            if n3 <= exact_upto {
                self.weighted_exact(n3, d)
            } else {
                self.rooftop.weighted(n3, d)
            }
        });
        Ok(SuccessValue {
            value,
            tail_bound: shell_tail_bound(m_bar, limit),
            n3_limit: limit,
        })
    }

    /// Mean photon number at which the hybrid success probability reaches half its asymptote, `1/32`.
    pub fn m_half(&self, d: &DetectorModel) -> Result<f64> {
        let method = SuccessMethod::Hybrid(self.table.n3_max().min(STANDARD_N3_MAX));
        let gap = |m: f64| -> Result<f64> { Ok(self.prob_succ(m, d, method)?.value - 1.0 / 32.0) };
        let mut lo = 1e-3;
        let mut hi = 10.0 / d.eta();
        while gap(hi)? < 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        while (hi - lo) > 1e-7 * hi {
            let mid = 0.5 * (lo + hi);
            if gap(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// First-order loss coefficient: `P(η) ≈ P(1) − ζ (1−η)`, equal to `2 Σ_{n3} f(n3) C(1, 2n3−1)`.
    pub fn zeta(&self, m_bar: f64) -> Result<SuccessValue> {
        check_mean(m_bar)?;
        let limit = shells_for_tail(m_bar, 1e-12 * 2.0 * d_sum(1) * f_weight(1, m_bar));
        let value = 2.0
            * shell_sum(m_bar, limit, |n3| match self.table.row(n3) {
                Some(row) => row[0],
                None => edge_coefficient(n3),
            });
        Ok(SuccessValue {
            value,
            tail_bound: 2.0 * shell_tail_bound(m_bar, limit),
            n3_limit: limit,
        })
    }

    /// `ζ` from a Richardson-extrapolated one-sided difference of the exact success probability.
    pub fn zeta_numeric(&self, m_bar: f64, h: f64) -> Result<f64> {
        // One common truncation, so that differences see no tail mismatch.
        let limit = SuccessMethod::ExactTruncated(Some(shells_for_tail(m_bar, TIGHT_TAIL)));
        let p = |eta: f64| -> Result<f64> { Ok(self.prob_succ(m_bar, &DetectorModel::new(eta)?, limit)?.value) };
        let p1 = p(1.0)?;
        let slope = |step: f64| -> Result<f64> { Ok((p1 - p(1.0 - step)?) / step) };
        Ok(2.0 * slope(h / 2.0)? - slope(h)?)
    }

    /// Location and value of the largest `ζ`, by golden-section search on `[0.5, 5]`.
    pub fn zeta_maximum(&self) -> Result<(f64, f64)> {
        let z = |m: f64| -> Result<f64> { Ok(self.zeta(m)?.value) };
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (0.5, 5.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (z(c)?, z(d)?);
        while b - a > 1e-7 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = z(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = z(d)?;
            }
        }
        let m = 0.5 * (a + b);
        Ok((m, z(m)?))
    }
}

/// Lossy success probability using the shared standard model.
pub fn prob_succ(m_bar: f64, d: &DetectorModel, method: SuccessMethod) -> Result<SuccessValue> {
    SuccessModel::standard().prob_succ(m_bar, d, method)
}

/// Coincident clicks from outcomes that are not odd-odd.
///
/// Every tabulated pair with `n1, n2 ≥ 1` and at least one even count
/// contributes `P̄(n1, n2) (1−ε^{n1})(1−ε^{n2})`; the bound is the grid's
/// missing probability mass.
pub fn prob_false_positive(m_bar: f64, d: &DetectorModel, grid: &ProbabilityGrid) -> Result<SuccessValue> {
    let tail_bound = grid.tail(m_bar)?;
    let value = grid
        .iter(m_bar)
        .filter(|&(n1, n2, _)| n1 >= 1 && n2 >= 1 && Parity::of(n1, n2) != Parity::OddOdd)
        .map(|(n1, n2, p)| p * d.click(n1) * d.click(n2))
        .sum();
    Ok(SuccessValue {
        value,
        tail_bound,
        n3_limit: grid.t_max() / 2,
    })
}

/// `W(n3, ε)` for each `ε` from the generating polynomials of `E = E_{n3}`.
///
/// `Σ_{n1} C(n1, 2n3−n1) z^{n1} = (1/8) Σ_m [U_m V_m + U'_m V'_m] − (1/16)[n3 odd] U_c V_c`,
/// with `U_m = Σ_k E[k][m−1]² z^k`, `V_m = Σ_k E[k][m]² z^k`,
/// `U'_m = Σ_k E[k][m−1] E[k][n3−m] z^k` and `V'_m = Σ_k E[k][m] E[k][n3+1−m] z^k`.
pub(crate) fn gf_weighted(e: &BsElementTable, eps: &[f64]) -> Vec<f64> {
    let n = e.n();
    // Columns of E, so that every polynomial is a contiguous dot product.
    let cols: Vec<Vec<f64>> = (0..=n).map(|l| (0..=n).map(|k| e.get(k, l)).collect()).collect();
    let squares: Vec<Vec<f64>> = cols.iter().map(|c| c.iter().map(|v| v * v).collect()).collect();
    let mixed = |a: usize, b: usize| -> Vec<f64> { cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y).collect() };
    let u_cross: Vec<Vec<f64>> = (1..=n).map(|m| mixed(m - 1, n - m)).collect();
    let v_cross: Vec<Vec<f64>> = (1..=n).map(|m| mixed(m, n + 1 - m)).collect();
    let centre = (n % 2 == 1).then(|| (n + 1) / 2);

    eps.iter()
        .map(|&z| {
            let mut pw = vec![1.0; n + 1];
            for k in 1..=n {
                pw[k] = pw[k - 1] * z;
            }
            // Even and odd parts of Σ_k c_k z^k.
            let split = |c: &[f64]| -> (f64, f64) {
                let (mut ev, mut od) = (0.0, 0.0);
                for (k, (ck, pk)) in c.iter().zip(&pw).enumerate() {
                    if k % 2 == 0 {
                        ev += ck * pk;
                    } else {
                        od += ck * pk;
                    }
                }
                (ev, od)
            };
            let sq: Vec<(f64, f64)> = squares.iter().map(|c| split(c)).collect();
            let odd_part = |(ue, uo): (f64, f64), (ve, vo): (f64, f64)| ue * vo + uo * ve;
            let mut s_odd = 0.0;
            for m in 1..=n {
                s_odd += odd_part(sq[m - 1], sq[m]) / 8.0;
                s_odd += odd_part(split(&u_cross[m - 1]), split(&v_cross[m - 1])) / 8.0;
            }
            if let Some(c) = centre {
                s_odd -= odd_part(sq[c - 1], sq[c]) / 16.0;
            }
            let both = 1.0 + pw[n] * pw[n];
            d_sum(n) * both - 2.0 * s_odd
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_model() -> SuccessModel {
        SuccessModel::new(
            Arc::new(CCoefficientTable::build(40)),
            RooftopModel { alpha: 0.29, beta: 0.5 },
        )
    }

    #[test]
    fn ideal_examples() {
        assert_eq!(prob_succ_ideal(0.0).unwrap(), 0.0);
        assert_relative_eq!(prob_succ_ideal(1.0).unwrap(), 7.0 / 384.0, epsilon = 1e-16);
        assert!((prob_succ_ideal(1e8).unwrap() - 1.0 / 16.0).abs() < 1e-8);
        assert_relative_eq!(prob_avg(1, 1, 1.0).unwrap(), 3.0 / 512.0, epsilon = 1e-16);
        assert_eq!(prob_avg(1, 3, 0.7).unwrap(), prob_avg(3, 1, 0.7).unwrap());
        assert!(prob_avg(2, 3, 1.0).is_err());
    }

    #[test]
    fn series_matches_closed_form() {
        for m in [0.1, 1.0, 7.0, 40.0] {
            let s = prob_succ_series(m, 1e-12).unwrap();
            assert_relative_eq!(s.value, prob_succ_ideal(m).unwrap(), max_relative = 1e-10);
        }
    }

    #[test]
    fn tail_bound_is_a_bound() {
        let m = 3.0;
        for l in [5usize, 20, 60] {
            let rest: f64 = (l + 1..4000).map(|n3| (n3 + 2) as f64 / 16.0 * f_weight(n3, m)).sum();
            let b = shell_tail_bound(m, l);
            assert_relative_eq!(b, rest, max_relative = 1e-9);
        }
        assert!(shell_tail_bound(2.0, shells_for_tail(2.0, 1e-8)) <= 1e-8);
        assert!(shell_tail_bound(2.0, shells_for_tail(2.0, 1e-8) - 1) > 1e-8);
    }

    #[test]
    fn generating_route_matches_table() {
        let table = CCoefficientTable::build(30);
        for n3 in [1usize, 2, 9, 30] {
            let e = BsElementTable::build(n3);
            let eps = [0.0, 0.3, 0.9, 0.999];
            for (eps, got) in eps.iter().zip(gf_weighted(&e, &eps)) {
                let d = DetectorModel::new(1.0 - eps).unwrap();
                let want: f64 = table
                    .row(n3)
                    .unwrap()
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * d.click(2 * i + 1) * d.click(2 * n3 - 2 * i - 1))
                    .sum();
                assert!(
                    (got - want).abs() < 1e-14 * d_sum(n3),
                    "n3={n3} ε={eps}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn ideal_detector_reduces_to_closed_form() {
        let model = small_model();
        let d = DetectorModel::ideal();
        for m in [0.2, 1.0, 4.0] {
            for method in [
                SuccessMethod::ExactTruncated(None),
                SuccessMethod::Rooftop,
                SuccessMethod::Hybrid(40),
            ] {
                let v = model.prob_succ(m, &d, method).unwrap();
                assert!(
                    (v.value - prob_succ_ideal(m).unwrap()).abs() < 1e-10,
                    "{method:?} m̄={m}"
                );
            }
        }
    }

    #[test]
    fn exact_beyond_table_uses_kernels() {
        let model = small_model();
        let full = SuccessModel::new(Arc::new(CCoefficientTable::build(70)), *model.rooftop());
        let d = DetectorModel::new(0.35).unwrap();
        let a = model
            .prob_succ(4.0, &d, SuccessMethod::ExactTruncated(Some(70)))
            .unwrap();
        let b = full
            .prob_succ(4.0, &d, SuccessMethod::ExactTruncated(Some(70)))
            .unwrap();
        assert_relative_eq!(a.value, b.value, max_relative = 1e-12);
        assert!(model.prob_succ(4.0, &d, SuccessMethod::Hybrid(41)).is_err());
    }

    #[test]
    fn monotone_in_mean_and_efficiency() {
        let model = small_model();
        let mut last_eta = 0.0;
        for eta in [0.05, 0.3, 0.7, 1.0] {
            let d = DetectorModel::new(eta).unwrap();
            let mut last = 0.0;
            for m in [0.1, 0.5, 1.0, 2.0, 4.0] {
                let v = model
                    .prob_succ(m, &d, SuccessMethod::ExactTruncated(None))
                    .unwrap()
                    .value;
                assert!(v >= last);
                last = v;
            }
            assert!(last >= last_eta);
            last_eta = last;
        }
    }

    #[test]
    fn zeta_agrees_with_numerical_derivative() {
        let model = small_model();
        assert_eq!(model.zeta(0.0).unwrap().value, 0.0);
        for m in [0.5, 1.3, 3.0] {
            let a = model.zeta(m).unwrap().value;
            let b = model.zeta_numeric(m, 1e-3).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-5);
        }
    }

    #[test]
    fn false_positives_unroll_at_unit_efficiency() {
        let grid = ProbabilityGrid::build(40);
        let m = 0.8;
        let fp = prob_false_positive(m, &DetectorModel::ideal(), &grid).unwrap();
        let direct: f64 = (1..=40)
            .flat_map(|n1| (1..=40 - n1).map(move |n2| (n1, n2)))
            .filter(|&(a, b)| a % 2 == 0 || b % 2 == 0)
            .map(|(a, b)| grid.probability(a, b, m).unwrap())
            .sum();
        assert_relative_eq!(fp.value, direct, max_relative = 1e-14);
        assert_eq!(
            prob_false_positive(0.0, &DetectorModel::ideal(), &grid).unwrap().value,
            0.0
        );
    }

    #[test]
    fn false_positives_dominate_true_positives() {
        // Coincidences approach 1 while heralds approach 1/16, so the ratio
        // settles between 15 and 26 on m̄ ∈ [1, 10], η ∈ [0.01, 1].
        let model = SuccessModel::standard();
        let grid = ProbabilityGrid::build(200);
        for m in [1.0, 4.0, 10.0] {
            for eta in [0.01, 0.1, 1.0] {
                let d = DetectorModel::new(eta).unwrap();
                let tp = model.prob_succ(m, &d, SuccessMethod::Hybrid(300)).unwrap().value;
                let fp = prob_false_positive(m, &d, &grid).unwrap();
                assert!(fp.tail_bound < 1e-3);
                let r = fp.value / tp;
                assert!((14.0..26.0).contains(&r), "m̄ = {m}, η = {eta}: ratio {r}");
            }
        }
    }
}
