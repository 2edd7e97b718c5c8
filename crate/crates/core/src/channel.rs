//! Target interaction and the receiver's view of the two hypotheses.
//!
//! Under `H0` the receiver sees thermal background `rho[n_B]` only. Under
//! `H1` the probe is mixed with a rescaled background on a beamsplitter of
//! reflectivity `kappa`, which maps every thermal component
//! `rho[m] -> rho[kappa m + n_B]` and a coherent amplitude
//! `|beta|^2 -> kappa |beta|^2`. Heralded probes stay signed thermal
//! mixtures with unchanged weights, so receiver click probabilities are
//! weight-linear sums of single-thermal click probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::povm::{click_probability, ClickMultiplex};
use crate::states::{DisplacedThermal, SignedThermalMixture, StateModel};

/// Reflectivity `kappa` in `(0, 1)` and received background mean `n_B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetChannel {
    reflectivity: f64,
    background_mean: f64,
}

impl TargetChannel {
    pub fn new(reflectivity: f64, background_mean: f64) -> Result<Self> {
        if !(reflectivity > 0.0 && reflectivity < 1.0) {
            return domain(format!("reflectivity must lie in (0, 1), got {reflectivity}"));
        }
        if !(background_mean.is_finite() && background_mean >= 0.0) {
            return domain(format!(
                "background mean must be non-negative, got {background_mean}"
            ));
        }
        Ok(Self {
            reflectivity,
            background_mean,
        })
    }

    pub fn reflectivity(&self) -> f64 {
        self.reflectivity
    }

    pub fn background_mean(&self) -> f64 {
        self.background_mean
    }

    /// Mean of the thermal environment mode entering the beamsplitter,
    /// `n_B / (1 - kappa)`, which keeps the received background independent
    /// of the reflectivity.
    pub fn environment_mean(&self) -> f64 {
        self.background_mean / (1.0 - self.reflectivity)
    }
}

/// Receiver-side states under the two hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisPair {
    pub h0: StateModel,
    pub h1: StateModel,
}

impl HypothesisPair {
    pub fn new(channel: &TargetChannel, signal: &StateModel) -> Self {
        Self {
            h0: background_state(channel),
            h1: apply_channel(channel, signal),
        }
    }
}

pub fn background_state(channel: &TargetChannel) -> StateModel {
    StateModel::Mixture(
        SignedThermalMixture::thermal(channel.background_mean)
            .expect("channel background is validated"),
    )
}

pub fn apply_channel(channel: &TargetChannel, signal: &StateModel) -> StateModel {
    let kappa = channel.reflectivity;
    let nb = channel.background_mean;
    match signal {
        StateModel::Mixture(m) => StateModel::Mixture(m.map_means(|mean| mean * kappa + nb)),
        StateModel::Displaced(d) => StateModel::Displaced(
            DisplacedThermal::new(kappa * d.coherent_mean(), kappa * d.thermal_mean() + nb)
                .expect("affine map keeps means non-negative"),
        ),
    }
}

/// `Pr_{N_S}(k_S | H_i)` for the given hypothesis state.
pub fn receiver_click_prob(receiver: &ClickMultiplex, clicks: u32, hypothesis_state: &StateModel) -> Result<f64> {
    click_probability(receiver, clicks, hypothesis_state)
}

/// Bayes update: `Pr(H1 | outcome)`.
pub fn posterior(prior_h1: f64, likelihood_h0: f64, likelihood_h1: f64) -> Result<f64> {
    for (name, v) in [
        ("prior", prior_h1),
        ("H0 likelihood", likelihood_h0),
        ("H1 likelihood", likelihood_h1),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return domain(format!("{name} must lie in [0, 1], got {v}"));
        }
    }
    if likelihood_h0 == 0.0 && likelihood_h1 == 0.0 {
        return Err(Error::UndefinedPosterior);
    }
    let numerator = prior_h1 * likelihood_h1;
    let evidence = numerator + (1.0 - prior_h1) * likelihood_h0;
    if evidence == 0.0 {
        return Err(Error::UndefinedPosterior);
    }
    Ok(numerator / evidence)
}

/// `(Pr(H0 | outcome), Pr(H1 | outcome))`; the pair sums to one.
pub fn posterior_pair(prior_h1: f64, likelihood_h0: f64, likelihood_h1: f64) -> Result<(f64, f64)> {
    let p1 = posterior(prior_h1, likelihood_h0, likelihood_h1)?;
    Ok((1.0 - p1, p1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{herald_state, mean_photon};

    #[test]
    fn channel_validation() {
        assert!(TargetChannel::new(0.0, 1.0).is_err());
        assert!(TargetChannel::new(1.0, 1.0).is_err());
        assert!(TargetChannel::new(0.5, -1.0).is_err());
        assert!(TargetChannel::new(0.5, 0.0).is_ok());
    }

    #[test]
    fn background_examples() {
        for nb in [0.0, 3.0, 10.0] {
            let ch = TargetChannel::new(0.1, nb).unwrap();
            assert_eq!(background_state(&ch), StateModel::thermal(nb).unwrap());
        }
    }

    #[test]
    fn thermal_signal_is_shifted() {
        let ch = TargetChannel::new(0.1, 3.0).unwrap();
        let out = apply_channel(&ch, &StateModel::thermal(1.0).unwrap());
        match out {
            StateModel::Mixture(m) => {
                assert_eq!(m.components().len(), 1);
                assert!((m.components()[0].mean - 3.1).abs() < 1e-15);
            }
            _ => panic!("type changed"),
        }
        let out = apply_channel(&ch, &StateModel::vacuum());
        assert_eq!(out, StateModel::thermal(3.0).unwrap());
    }

    #[test]
    fn coherent_signal_becomes_displaced_thermal() {
        let ch = TargetChannel::new(0.3, 10.0).unwrap();
        let out = apply_channel(&ch, &StateModel::coherent(2.0).unwrap());
        assert_eq!(out, StateModel::from(DisplacedThermal::new(0.6, 10.0).unwrap()));
    }

    #[test]
    fn mean_is_conserved_with_weights_preserved() {
        let ch = TargetChannel::new(0.3, 10.0).unwrap();
        let h = herald_state(1.0, 0.9, 2, 2).unwrap();
        let out = apply_channel(&ch, &h.state_model());
        let StateModel::Mixture(m) = &out else { panic!() };
        for (a, b) in m.components().iter().zip(h.state.components()) {
            assert_eq!(a.weight, b.weight);
        }
        let expected = 0.3 * h.state.mean() + 10.0;
        assert!((mean_photon(&out) - expected).abs() < 1e-12);
    }

    #[test]
    fn false_alarm_probability() {
        let ch = TargetChannel::new(0.1, 10.0).unwrap();
        let rx = ClickMultiplex::single(0.9).unwrap();
        let h0 = background_state(&ch);
        assert!((receiver_click_prob(&rx, 1, &h0).unwrap() - 0.9).abs() < 1e-15);
        assert!((receiver_click_prob(&rx, 0, &h0).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn coherent_return_without_background() {
        let kappa = 0.4;
        let ch = TargetChannel::new(kappa, 0.0).unwrap();
        let rx = ClickMultiplex::single(1.0).unwrap();
        let h1 = apply_channel(&ch, &StateModel::coherent(1.5).unwrap());
        let p = receiver_click_prob(&rx, 1, &h1).unwrap();
        assert!((p - (1.0 - (-kappa * 1.5f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn posterior_examples() {
        assert_eq!(posterior(0.5, 0.4, 0.4).unwrap(), 0.5);
        assert!((posterior(0.5, 0.3, 0.9).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(posterior(1.0, 0.2, 0.7).unwrap(), 1.0);
        assert_eq!(posterior(0.5, 0.0, 0.0), Err(Error::UndefinedPosterior));
        assert!(posterior(1.5, 0.2, 0.7).is_err());
        let (p0, p1) = posterior_pair(0.3, 0.2, 0.7).unwrap();
        assert_eq!(p0 + p1, 1.0);
    }

    #[test]
    fn h0_is_reflectivity_independent() {
        let rx = ClickMultiplex::new(2, 0.9).unwrap();
        let a = background_state(&TargetChannel::new(0.1, 3.0).unwrap());
        let b = background_state(&TargetChannel::new(0.8, 3.0).unwrap());
        for k in 0..=2 {
            assert_eq!(
                receiver_click_prob(&rx, k, &a).unwrap(),
                receiver_click_prob(&rx, k, &b).unwrap()
            );
        }
    }
}
