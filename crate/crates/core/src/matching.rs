//! Click-probability matching between a thermal probe and a coherent probe.
//!
//! An eavesdropper with a single click detector sees a thermal probe click
//! less often than a coherent probe of the same mean. Raising the thermal
//! mean until the two single-detector click probabilities agree keeps the
//! probes equally discoverable to that detector.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchSpec {
    pub coherent_mean: f64,
    pub eavesdropper_efficiency: f64,
}

impl MatchSpec {
    pub fn new(coherent_mean: f64, eavesdropper_efficiency: f64) -> Result<Self> {
        if !(coherent_mean.is_finite() && coherent_mean >= 0.0) {
            return domain(format!("coherent mean must be non-negative, got {coherent_mean}"));
        }
        if !(eavesdropper_efficiency > 0.0 && eavesdropper_efficiency <= 1.0) {
            return domain(format!(
                "eavesdropper efficiency must lie in (0, 1], got {eavesdropper_efficiency}"
            ));
        }
        Ok(Self {
            coherent_mean,
            eavesdropper_efficiency,
        })
    }
}

/// `1 - exp(-eta n_alpha)`.
pub fn coherent_click_prob(coherent_mean: f64, efficiency: f64) -> f64 {
    -(-efficiency * coherent_mean).exp_m1()
}

/// `eta n_S / (1 + eta n_S)`.
pub fn thermal_click_prob(thermal_mean: f64, efficiency: f64) -> f64 {
    let x = efficiency * thermal_mean;
    x / (1.0 + x)
}

/// Thermal mean whose single-detector click probability equals that of the
/// coherent state: `(exp(eta_E n_alpha) - 1) / eta_E`.
pub fn matched_mean(spec: &MatchSpec) -> f64 {
    let eta = spec.eavesdropper_efficiency;
    (eta * spec.coherent_mean).exp_m1() / eta
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn click_probability_examples() {
        assert_eq!(coherent_click_prob(0.0, 0.9), 0.0);
        assert!((coherent_click_prob(1.0, 1.0) - 0.632_121).abs() < 1e-6);
        assert!((coherent_click_prob(1.0, 0.9) - 0.593_430).abs() < 1e-6);
        assert_eq!(thermal_click_prob(0.0, 0.9), 0.0);
        assert!((thermal_click_prob(1.0, 0.9) - 0.473_684).abs() < 1e-6);
    }

    #[test]
    fn matched_mean_examples() {
        let spec = |a| MatchSpec::new(a, 0.9).unwrap();
        assert_eq!(matched_mean(&spec(0.0)), 0.0);
        assert!((matched_mean(&spec(1.0)) - 1.621_781).abs() < 1e-6);
        assert!((matched_mean(&spec(2.0)) - 5.610_719).abs() < 1e-6);
        let n = matched_mean(&spec(1.0));
        assert!((thermal_click_prob(n, 0.9) - coherent_click_prob(1.0, 0.9)).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        assert!(MatchSpec::new(1.0, 0.0).is_err());
        assert!(MatchSpec::new(1.0, 1.2).is_err());
        assert!(MatchSpec::new(-1.0, 0.5).is_err());
    }
}
