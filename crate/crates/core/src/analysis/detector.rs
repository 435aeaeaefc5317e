//! Lossy photon counters modelled as binomial thinning.

use crate::error::{domain, Result};
use crate::optics::ln_factorial;

/// Photon-number-resolving detector with effective efficiency `η ∈ (0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorModel {
    eta: f64,
}

impl DetectorModel {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(domain(format!("detector efficiency {eta} outside (0, 1]")));
        }
        Ok(Self { eta })
    }

    pub fn ideal() -> Self {
        Self { eta: 1.0 }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `ε = 1 − η`.
    pub fn loss(&self) -> f64 {
        1.0 - self.eta
    }

    /// Probability that `n` incident photons produce at least one count, `1 − ε^n`.
    pub fn click(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else if self.eta == 1.0 {
            1.0
        } else {
            -(n as f64 * (-self.eta).ln_1p()).exp_m1()
        }
    }
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self::ideal()
    }
}

/// Measured-count distribution `P̄_m = Σ_n P_n C(n,m) η^m (1−η)^{n−m}`.
pub fn detector_thinning(dist: &[f64], d: &DetectorModel) -> Result<Vec<f64>> {
    let total: f64 = dist.iter().sum();
    if dist.iter().any(|p| !(*p >= 0.0)) || total > 1.0 + 1e-9 {
        return Err(domain("photon-count distribution must be nonnegative with mass ≤ 1"));
    }
    let eta = d.eta();
    if eta == 1.0 {
        return Ok(dist.to_vec());
    }
    let (ln_eta, ln_eps) = (eta.ln(), (-eta).ln_1p());
    let mut out = vec![0.0; dist.len()];
    for (n, &p) in dist.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (m, slot) in out.iter_mut().enumerate().take(n + 1) {
            let ln_binom = ln_factorial(n) - ln_factorial(m) - ln_factorial(n - m);
            *slot += p * (ln_binom + m as f64 * ln_eta + (n - m) as f64 * ln_eps).exp();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_efficiency() {
        for eta in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(DetectorModel::new(eta).is_err());
        }
    }

    #[test]
    fn single_photon_and_vacuum_outcome() {
        let d = DetectorModel::new(0.3).unwrap();
        let out = detector_thinning(&[0.0, 1.0], &d).unwrap();
        assert_relative_eq!(out[0], 0.7, epsilon = 1e-15);
        assert_relative_eq!(out[1], 0.3, epsilon = 1e-15);
        let mut point = vec![0.0; 8];
        point[7] = 1.0;
        let out = detector_thinning(&point, &d).unwrap();
        assert_relative_eq!(out[0], 0.7f64.powi(7), max_relative = 1e-12);
        assert_relative_eq!(1.0 - d.click(7), 0.7f64.powi(7), max_relative = 1e-12);
    }

    #[test]
    fn ideal_is_identity() {
        let dist = vec![0.1, 0.2, 0.3, 0.4];
        assert_eq!(detector_thinning(&dist, &DetectorModel::ideal()).unwrap(), dist);
    }

    proptest! {
        #[test]
        fn thinning_preserves_mass(w in proptest::collection::vec(0.0..1.0f64, 1..40), eta in 0.01..1.0f64) {
            let s: f64 = w.iter().sum::<f64>() + 1e-3;
            let dist: Vec<f64> = w.iter().map(|v| v / s).collect();
            let out = detector_thinning(&dist, &DetectorModel::new(eta).unwrap()).unwrap();
            let (a, b): (f64, f64) = (dist.iter().sum(), out.iter().sum());
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(out.iter().all(|p| *p >= 0.0));
        }
    }
}
