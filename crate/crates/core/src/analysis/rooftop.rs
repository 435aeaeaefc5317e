//! Piecewise-linear ("rooftop") model of the coefficients at fixed `n3`.
//!
//! `C(n1, 2n3−n1) ≈ a · min(n1, 2n3−n1) + b`. The two constants follow from
//! the exact sum rule `Σ C = D(n3)` and from matching the second moment
//! `Σ C (n1−n3)² = D σ²`, where the spread `σ(n3) = α n3 + β` is an affine
//! law fitted to exact coefficients. Sums of the tent against geometric
//! detector factors are done in closed form, so the model costs `O(1)` per
//! `n3` and reaches arbitrarily large `m̄`.

use crate::error::{usage, Result};

use super::coefficients::{d_sum, CCoefficientTable};
use super::detector::DetectorModel;

/// Affine spread law `σ(n3) = α n3 + β`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RooftopModel {
    pub alpha: f64,
    pub beta: f64,
}

/// Fit window used for the frozen default constants.
pub const FIT_RANGE: (usize, usize) = (100, 300);

impl Default for RooftopModel {
    /// Least-squares fit over `n3 ∈ [100, 300]` of the exact spreads, frozen.
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
        }
    }
}

pub(crate) const DEFAULT_ALPHA: f64 = 0.288_701_940_797_008;
pub(crate) const DEFAULT_BETA: f64 = 0.549_364_446_714_485;

/// Quality of an affine spread fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitReport {
    pub model: RooftopModel,
    /// Largest `|σ_fit − σ| / σ` over the window.
    pub max_relative_residual: f64,
}

/// Tent parameters for one `n3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tent {
    /// `n3 ≤ 2`: all coefficients equal `D(n3)/n3` exactly.
    Uniform(f64),
    Linear {
        a: f64,
        b: f64,
    },
}

/// `(Σ|u|, Σu², Σ|u|³)` over `u = n1 − n3`, odd `n1 ∈ [1, 2n3−1]`.
fn offset_moments(n3: usize) -> (f64, f64, f64) {
    if n3 % 2 == 1 {
        let h = ((n3 - 1) / 2) as f64;
        let p = h * (h + 1.0);
        (2.0 * p, 8.0 * p * (2.0 * h + 1.0) / 6.0, 16.0 * (p / 2.0).powi(2))
    } else {
        let h = (n3 / 2) as f64;
        (
            2.0 * h * h,
            2.0 * h * (4.0 * h * h - 1.0) / 3.0,
            2.0 * h * h * (2.0 * h * h - 1.0),
        )
    }
}

impl RooftopModel {
    /// Least-squares affine fit of the exact spreads over `n3 ∈ [lo, hi]`.
    pub fn fit(table: &CCoefficientTable, lo: usize, hi: usize) -> Result<FitReport> {
        if lo < 3 || hi <= lo || hi > table.n3_max() {
            return Err(usage(format!(
                "fit window [{lo}, {hi}] must satisfy 3 ≤ lo < hi ≤ {}",
                table.n3_max()
            )));
        }
        let pts: Vec<(f64, f64)> = (lo..=hi)
            .map(|n3| (n3 as f64, table.spread(n3).expect("inside table")))
            .collect();
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / n, sy / n);
        let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |a, p| {
            (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2))
        });
        let alpha = sxy / sxx;
        let model = RooftopModel {
            alpha,
            beta: my - alpha * mx,
        };
        let max_relative_residual = pts
            .iter()
            .map(|&(x, y)| ((model.alpha * x + model.beta) - y).abs() / y)
            .fold(0.0, f64::max);
        Ok(FitReport {
            model,
            max_relative_residual,
        })
    }

    pub fn spread(&self, n3: usize) -> f64 {
        self.alpha * n3 as f64 + self.beta
    }

    pub fn tent(&self, n3: usize) -> Tent {
        let d = d_sum(n3);
        if n3 <= 2 {
            return Tent::Uniform(d / n3.max(1) as f64);
        }
        let n = n3 as f64;
        let (abs1, sq, abs3) = offset_moments(n3);
        let (s0, s1) = (n, n * n - abs1);
        let (t0, t1) = (sq, n * sq - abs3);
        let var = self.spread(n3).powi(2);
        let det = s1 * t0 - s0 * t1;
        Tent::Linear {
            a: d * (t0 - s0 * var) / det,
            b: d * (s1 * var - t1) / det,
        }
    }

    /// Model value of `C(n1, 2n3−n1)` for odd `n1`.
    pub fn coefficient(&self, n1: usize, n3: usize) -> f64 {
        match self.tent(n3) {
            Tent::Uniform(c) => c,
            Tent::Linear { a, b } => a * n1.min(2 * n3 - n1) as f64 + b,
        }
    }

    /// `Σ_{odd n1} C_model (1−ε^{n1})(1−ε^{n2})` at fixed `n3`, in closed form.
    pub fn weighted(&self, n3: usize, det: &DetectorModel) -> f64 {
        let g = Geometric::new(det.loss());
        let both = 1.0 + g.pow(2 * n3);
        // Σ ε^{n1} over odd n1 in [1, 2n3−1].
        let flat = g.pow(1) * g.sum0(n3);
        match self.tent(n3) {
            Tent::Uniform(c) => c * (n3 as f64 * both - 2.0 * flat),
            Tent::Linear { a, b } => {
                let n_a = (n3 - 1) / 2 + 1;
                let n_b = n3 - n_a;
                // n1 ≤ n3: tent = n1 = 2i+1.
                let part_a = g.pow(1) * (2.0 * g.sum1(n_a) + g.sum0(n_a));
                // n1 > n3: tent = n2 = 2j+1, exponent 2n3 − n2.
                let part_b = if n_b == 0 {
                    0.0
                } else {
                    let j1 = n_b - 1;
                    g.pow(2 * n3 - 2 * j1 - 1) * ((2 * j1 + 1) as f64 * g.sum0(n_b) - 2.0 * g.sum1(n_b))
                };
                let (abs1, _, _) = offset_moments(n3);
                let tent_sum = (n3 * n3) as f64 - abs1;
                a * (tent_sum * both - 2.0 * (part_a + part_b)) + b * (n3 as f64 * both - 2.0 * flat)
            }
        }
    }
}

/// Sums of powers of `r = ε²` with a direct-summation fallback where the closed forms cancel.
struct Geometric {
    eps: f64,
    ln_eps: f64,
    r: f64,
    ln_r: f64,
    one_minus_r: f64,
}

impl Geometric {
    fn new(eps: f64) -> Self {
        let eta = 1.0 - eps;
        let ln_eps = (-eta).ln_1p();
        Self {
            eps,
            ln_eps,
            r: eps * eps,
            ln_r: 2.0 * ln_eps,
            one_minus_r: eta * (2.0 - eta),
        }
    }

    fn pow(&self, n: usize) -> f64 {
        if n == 0 {
            1.0
        } else if self.eps == 0.0 {
            0.0
        } else {
            (n as f64 * self.ln_eps).exp()
        }
    }

    fn rpow(&self, n: usize) -> f64 {
        self.pow(2 * n)
    }

    fn direct(&self, n: usize) -> bool {
        self.eps == 0.0 || (n as f64) * self.one_minus_r < 1.0
    }

    /// `Σ_{j<n} r^j`.
    fn sum0(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        if self.direct(n) {
            let (mut s, mut p) = (0.0, 1.0);
            for _ in 0..n {
                s += p;
                p *= self.r;
            }
            return s;
        }
        -(n as f64 * self.ln_r).exp_m1() / self.one_minus_r
    }

    /// `Σ_{j<n} j r^j`.
    fn sum1(&self, n: usize) -> f64 {
        if n <= 1 {
            return 0.0;
        }
        if self.direct(n) {
            let (mut s, mut p) = (0.0, self.r);
            for j in 1..n {
                s += j as f64 * p;
                p *= self.r;
            }
            return s;
        }
        (self.r * self.sum0(n - 1) - (n - 1) as f64 * self.rpow(n)) / self.one_minus_r
    }
}
