//! Entanglement generation rate `C² P R`.

use crate::error::{domain, Result};

/// Inputs of the rate estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateInputs {
    /// Photon collection efficiency `C` per dot, in `(0, 1]`.
    pub collection_efficiency: f64,
    /// Heralding success probability `P`, at most `1/16`.
    pub success_probability: f64,
    /// Repetition rate `R` in attempts per second.
    pub repetition_rate: f64,
}

impl RateInputs {
    pub fn new(collection_efficiency: f64, success_probability: f64, repetition_rate: f64) -> Result<Self> {
        if !(collection_efficiency > 0.0 && collection_efficiency <= 1.0) {
            return Err(domain(format!(
                "collection efficiency {collection_efficiency} outside (0, 1]"
            )));
        }
        if !(0.0..=1.0 / 16.0).contains(&success_probability) {
            return Err(domain(format!(
                "success probability {success_probability} outside [0, 1/16]"
            )));
        }
        if !(repetition_rate > 0.0 && repetition_rate.is_finite()) {
            return Err(domain(format!("repetition rate {repetition_rate} must be positive")));
        }
        Ok(Self {
            collection_efficiency,
            success_probability,
            repetition_rate,
        })
    }
}

/// Heralded pairs per minute, `60 C² P R`.
pub fn rate_estimate(ri: &RateInputs) -> f64 {
    60.0 * ri.collection_efficiency.powi(2) * ri.success_probability * ri.repetition_rate
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let base = RateInputs::new(0.05, 1.0 / 32.0, 1.0 / 1.3e-6).unwrap();
        let r = rate_estimate(&base);
        assert!((r - 3605.769).abs() < 1e-2);
        assert_eq!(rate_estimate(&RateInputs::new(0.05, 0.0, 1e6).unwrap()), 0.0);
        let doubled = RateInputs::new(0.1, 1.0 / 32.0, 1.0 / 1.3e-6).unwrap();
        assert!((rate_estimate(&doubled) / r - 4.0).abs() < 1e-12);
        assert!(RateInputs::new(0.0, 0.01, 1.0).is_err());
        assert!(RateInputs::new(0.5, 0.1, 1.0).is_err());
        assert!(RateInputs::new(0.5, 0.01, -1.0).is_err());
    }
}
