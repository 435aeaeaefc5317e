//! Time-averaged probabilities of every outcome `(n1, n2)`, not only odd-odd.
//!
//! For identical dots the pre-splitter state splits into sectors labelled by
//! the level type of each dot (spin, `t−`, `t+`). Inside one sector and one
//! block of fixed `s = m + m̃` the photon totals per polarization are fixed, so
//! an outcome amplitude is `Σ_m w1(√m) w2(√(s−m)) a_m` with `w` a cosine (spin)
//! or sine (trion) of `g t √level` and `a_m` a product of two one-mode
//! splitter elements. Squaring and averaging over time leaves only the pairs
//! `(m, m)` and `(m, s−m)`: if `m+m̃ = μ+μ̃` then `±√m ± √m̃ ± √μ ± √μ̃ = 0`
//! forces `{m, m̃} = {μ, μ̃}`, so no other frequency combination is stationary.
//!
//! The averages are independent of `m̄`; the photon-number weight of a block is
//! `(1−x)² x^s` with `x = m̄/(m̄+1)`. One table therefore serves every `m̄`.

use crate::error::Result;
use crate::optics::element_table;

use super::coefficients::check_mean;

/// Parity class of an outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    OddOdd,
    EvenEven,
    Mixed,
}

impl Parity {
    pub fn of(n1: usize, n2: usize) -> Self {
        match (n1 % 2, n2 % 2) {
            (1, 1) => Parity::OddOdd,
            (0, 0) => Parity::EvenEven,
            _ => Parity::Mixed,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Spin,
    Minus,
    Plus,
}

const KINDS: [Kind; 3] = [Kind::Spin, Kind::Minus, Kind::Plus];

impl Kind {
    fn is_trion(self) -> bool {
        self != Kind::Spin
    }

    /// Number of dot labels sharing this photon content: `z−` and `z+` for spin.
    fn labels(self) -> f64 {
        if self == Kind::Spin {
            2.0
        } else {
            1.0
        }
    }
}

/// Long-time average of `T(ωt)²`, `T = cos` (spin) or `sin` (trion).
fn avg_sq(trion: bool, level: usize) -> f64 {
    match (trion, level) {
        (false, 0) => 1.0,
        (true, 0) => 0.0,
        _ => 0.5,
    }
}

/// Long-time average of `T1(ωt) T2(ωt)` at a common frequency.
fn avg_pair(t1: bool, t2: bool, level: usize) -> f64 {
    if t1 != t2 {
        0.0
    } else {
        avg_sq(t1, level)
    }
}

/// Long-time average of `T1(ωt)² T2(ωt)²` at a common frequency.
fn avg_quartic(t1: bool, t2: bool, level: usize) -> f64 {
    if level == 0 {
        return avg_sq(t1, 0) * avg_sq(t2, 0);
    }
    if t1 == t2 {
        3.0 / 8.0
    } else {
        1.0 / 8.0
    }
}

/// Time-averaged outcome probabilities for identical dots, as `m̄`-free weights.
///
/// For total photon number `T = n1 + n2` the averaged probability is
/// `(1−x)² Σ_δ x^{(T+δ)/2} G_δ(n1, n2)` where `δ` counts trions: `δ = 1` for odd
/// `T` and `δ ∈ {0, 2}` for even `T`.
#[derive(Clone, Debug)]
pub struct ProbabilityGrid {
    t_max: usize,
    /// `weights[T][n1] = [G_low, G_high]`; `G_high` is only used for even `T`.
    weights: Vec<Vec<[f64; 2]>>,
}

impl ProbabilityGrid {
    /// Tabulate all outcomes with `n1 + n2 ≤ t_max`.
    pub fn build(t_max: usize) -> Self {
        let weights = (0..=t_max).map(block_weights).collect();
        Self { t_max, weights }
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    /// Time-averaged probability of `(n1, n2)`; `None` outside the tabulated range.
    pub fn probability(&self, n1: usize, n2: usize, m_bar: f64) -> Option<f64> {
        let t = n1 + n2;
        let w = self.weights.get(t)?[n1];
        let x = m_bar / (m_bar + 1.0);
        let pre = 1.0 / ((m_bar + 1.0) * (m_bar + 1.0));
        Some(if t % 2 == 1 {
            pre * x.powi(((t + 1) / 2) as i32) * w[0]
        } else {
            pre * x.powi((t / 2) as i32) * (w[0] + x * w[1])
        })
    }

    /// Probability mass outside the tabulated range, `1 − Σ` over the grid.
    pub fn tail(&self, m_bar: f64) -> Result<f64> {
        check_mean(m_bar)?;
        let covered: f64 = (0..=self.t_max)
            .flat_map(|t| (0..=t).map(move |n1| (n1, t - n1)))
            .map(|(n1, n2)| self.probability(n1, n2, m_bar).unwrap_or(0.0))
            .sum();
        Ok((1.0 - covered).max(0.0))
    }

    /// Iterate over `(n1, n2, probability)` for all tabulated outcomes.
    pub fn iter(&self, m_bar: f64) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=self.t_max)
            .flat_map(move |t| (0..=t).map(move |n1| (n1, t - n1, self.probability(n1, t - n1, m_bar).unwrap_or(0.0))))
    }
}

/// `[G_low, G_high]` for every `n1` of one total photon number `t`.
fn block_weights(t: usize) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0; 2]; t + 1];
    for k1 in KINDS {
        for k2 in KINDS {
            let delta = k1.is_trion() as usize + k2.is_trion() as usize;
            if (t + delta) % 2 == 1 {
                continue;
            }
            let s = (t + delta) / 2;
            let slot = if delta == 2 { 1 } else { 0 };
            // Each trion dot removed one photon of its polarization from the block.
            let minus = (k1 == Kind::Minus) as usize + (k2 == Kind::Minus) as usize;
            let plus = (k1 == Kind::Plus) as usize + (k2 == Kind::Plus) as usize;
            let (Some(n_minus), Some(n_plus)) = (s.checked_sub(minus), s.checked_sub(plus)) else {
                continue;
            };
            // Each dot label carries amplitude 1/√2; spin kinds stand for two labels.
            let scale = k1.labels() * k2.labels() / 4.0;
            accumulate_sector(k1, k2, s, n_minus, n_plus, scale, |n1, v| out[n1][slot] += v);
        }
    }
    out
}

fn accumulate_sector(
    k1: Kind,
    k2: Kind,
    s: usize,
    n_minus: usize,
    n_plus: usize,
    scale: f64,
    mut emit: impl FnMut(usize, f64),
) {
    let (t1, t2) = (k1.is_trion(), k2.is_trion());
    let lo = t1 as usize;
    let hi = s - t2 as usize;
    if lo > hi {
        return;
    }
    let em = element_table(n_minus);
    let ep = element_table(n_plus);
    let levels: Vec<usize> = (lo..=hi).collect();
    // Path-a photon counts of dot 1 at level m.
    let l_minus = |m: usize| m - (k1 == Kind::Minus) as usize;
    let l_plus = |m: usize| m - (k1 == Kind::Plus) as usize;

    let diag: Vec<f64> = levels
        .iter()
        .map(|&m| {
            if 2 * m == s {
                avg_quartic(t1, t2, m)
            } else {
                avg_sq(t1, m) * avg_sq(t2, s - m)
            }
        })
        .collect();
    let cross: Vec<f64> = levels
        .iter()
        .map(|&m| {
            let partner = s - m;
            if 2 * m == s || partner < lo || partner > hi {
                0.0
            } else {
                avg_pair(t1, t2, m) * avg_pair(t1, t2, partner)
            }
        })
        .collect();

    let mut a = vec![0.0; levels.len()];
    for km in 0..=n_minus {
        let row_m = em.row(km);
        for kp in 0..=n_plus {
            let row_p = ep.row(kp);
            for (i, &m) in levels.iter().enumerate() {
                a[i] = row_m[l_minus(m)] * row_p[l_plus(m)];
            }
            let mut g = 0.0;
            for (i, &m) in levels.iter().enumerate() {
                g += diag[i] * a[i] * a[i];
                if cross[i] != 0.0 {
                    g += cross[i] * a[i] * a[s - m - lo];
                }
            }
            if g != 0.0 {
                emit(km + kp, scale * g);
            }
        }
    }
}

/// `true` when no signed combination `±√m ± √m̃ ± √μ ± √μ̃` with `m+m̃ = μ+μ̃ = s`
/// vanishes except for `{m, m̃} = {μ, μ̃}`.
pub fn resonance_free(s: usize) -> bool {
    let r = |v: usize| (v as f64).sqrt();
    for m in 0..=s {
        for mu in 0..=s {
            if mu == m || mu == s - m {
                continue;
            }
            let f = [r(m), r(s - m), r(mu), r(s - mu)];
            for signs in 0..16u32 {
                let v: f64 = (0..4).map(|i| if signs >> i & 1 == 1 { -f[i] } else { f[i] }).sum();
                if v.abs() < 1e-9 {
                    return false;
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::coefficients::{c_coefficient, f_weight};
    use crate::dynamics::{joint_pre_splitter, DotParams};
    use crate::optics::outcome_table;

    #[test]
    fn no_accidental_resonances() {
        assert!((0..=60).all(resonance_free));
    }

    #[test]
    fn odd_odd_entries_reproduce_c() {
        let grid = ProbabilityGrid::build(20);
        for m_bar in [0.3, 1.0, 4.0] {
            for (n1, n2) in [(1, 1), (1, 3), (3, 5), (5, 5), (1, 9)] {
                let expect = c_coefficient(n1, n2).unwrap() * f_weight((n1 + n2) / 2, m_bar);
                let got = grid.probability(n1, n2, m_bar).unwrap();
                assert!((got - expect).abs() < 1e-14, "({n1},{n2}) {got} vs {expect}");
            }
        }
    }

    #[test]
    fn grid_is_normalized_and_symmetric() {
        let grid = ProbabilityGrid::build(120);
        for m_bar in [0.5, 1.0, 2.0] {
            assert!(grid.tail(m_bar).unwrap() < 1e-7, "m̄={m_bar}");
            for (n1, n2, p) in grid.iter(m_bar).filter(|e| e.0 + e.1 <= 30) {
                let q = grid.probability(n2, n1, m_bar).unwrap();
                assert!((p - q).abs() < 1e-14 && p >= 0.0);
            }
        }
        assert_eq!(grid.probability(0, 0, 0.0), Some(1.0));
        assert_eq!(grid.probability(100, 100, 1.0), None);
    }

    #[test]
    fn matches_time_averaged_pipeline() {
        // Low-T outcomes only need levels m + m̃ ≤ 4, so a small truncation is exact there.
        let grid = ProbabilityGrid::build(6);
        let m_bar = 1.2;
        let p = DotParams::with_mean(1.0, m_bar).unwrap();
        let samples = 4000;
        let span = 4000.0;
        let mut acc = std::collections::BTreeMap::new();
        for i in 0..samples {
            let gt = (i as f64 + 0.5) * span / samples as f64;
            let pre = joint_pre_splitter(&p, &p, gt, 4)
                .unwrap()
                .filter(|k| k.photons.total() <= 6);
            for (k, v) in outcome_table(&pre, 0.0).unwrap().probabilities {
                *acc.entry(k).or_insert(0.0) += v / samples as f64;
            }
        }
        for ((n1, n2), avg) in acc {
            if n1 + n2 > 6 {
                continue;
            }
            let want = grid.probability(n1 as usize, n2 as usize, m_bar).unwrap();
            assert!(
                (avg - want).abs() < 5e-3 * want.max(1e-3),
                "({n1},{n2}) {avg} vs {want}"
            );
        }
    }
}
