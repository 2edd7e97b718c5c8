//! Truncated Fock-space reference computations.
//!
//! Everything here works on photon-number distributions and shares no code
//! path with the closed forms in `povm`, `states` and `channel`:
//!
//! - multiplex responses come from an occupancy recursion that routes each
//!   photon to a uniformly chosen detector,
//! - heralded states come from the TMSV Schmidt weights and that response,
//! - the target channel is either the exact loss-then-amplifier Fock kernel
//!   of the thermal attenuator, or the explicit two-mode beamsplitter
//!   matrix elements on a small truncated space,
//! - Wigner slices are Laguerre series.
//!
//! Every vector carries its trace deficit; callers compare against closed
//! forms only once the deficit is below tolerance.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::numeric::{ln_factorials, neumaier_sum};

/// Default truncation; the TMSV tail `(n/(1+n))^201` is ~1e-16 at `n = 5`.
pub const DEFAULT_N_MAX: usize = 200;
pub const DEFAULT_TRACE_TOLERANCE: f64 = 1e-10;
/// Largest truncation accepted by the full two-mode unitary route.
pub const FULL_UNITARY_N_MAX: usize = 40;

/// Diagonal of a density matrix truncated at `n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    probabilities: Vec<f64>,
    deficit: f64,
}

impl FockVector {
    /// Wraps a truncated distribution whose missing mass is `deficit`.
    pub fn new(probabilities: Vec<f64>, deficit: f64, tolerance: f64) -> Result<Self> {
        if probabilities.is_empty() {
            return domain("Fock vector needs at least the vacuum entry");
        }
        if !(deficit.abs() < tolerance) {
            return Err(Error::TruncationInsufficient { deficit, tolerance });
        }
        Ok(Self {
            probabilities,
            deficit,
        })
    }

    /// Treats `1 - sum(p)` as the truncated tail.
    pub fn from_truncated(probabilities: Vec<f64>, tolerance: f64) -> Result<Self> {
        let deficit = 1.0 - neumaier_sum(probabilities.iter().copied());
        Self::new(probabilities, deficit, tolerance)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn n_max(&self) -> usize {
        self.probabilities.len() - 1
    }

    pub fn trace_deficit(&self) -> f64 {
        self.deficit
    }

    pub fn mean(&self) -> f64 {
        neumaier_sum(self.probabilities.iter().enumerate().map(|(n, p)| n as f64 * p))
    }
}

/// Bose-Einstein distribution truncated at `n_max`.
pub fn thermal_fock(mean: f64, n_max: usize, tolerance: f64) -> Result<FockVector> {
    if !(mean.is_finite() && mean >= 0.0) {
        return domain(format!("thermal mean must be non-negative, got {mean}"));
    }
    let ratio = mean / (1.0 + mean);
    let mut p = Vec::with_capacity(n_max + 1);
    let mut term = 1.0 / (1.0 + mean);
    for _ in 0..=n_max {
        p.push(term);
        term *= ratio;
    }
    FockVector::from_truncated(p, tolerance)
}

/// Poisson distribution of a coherent state with `|alpha|^2 = mean`.
pub fn coherent_fock(mean: f64, n_max: usize, tolerance: f64) -> Result<FockVector> {
    if !(mean.is_finite() && mean >= 0.0) {
        return domain(format!("coherent mean must be non-negative, got {mean}"));
    }
    let mut p = Vec::with_capacity(n_max + 1);
    let mut term = (-mean).exp();
    for n in 0..=n_max {
        p.push(term);
        term *= mean / (n + 1) as f64;
    }
    FockVector::from_truncated(p, tolerance)
}

/// Fock state `|n>`.
pub fn fock_state(n: usize, n_max: usize) -> Result<FockVector> {
    if n > n_max {
        return domain(format!("Fock state {n} exceeds truncation {n_max}"));
    }
    let mut p = vec![0.0; n_max + 1];
    p[n] = 1.0;
    FockVector::new(p, 0.0, f64::MIN_POSITIVE)
}

/// `P(k clicks | n photons)` for `n` in `0..=n_max`, `k` in `0..=N`.
///
/// Each photon is lost with probability `1 - eta` or lands on one of the
/// `N` detectors uniformly; a detector clicks if it receives any photon.
pub fn multiplex_response(detectors: u32, efficiency: f64, n_max: usize) -> Result<Vec<Vec<f64>>> {
    if detectors == 0 {
        return domain("multiplex needs at least one detector");
    }
    if !(0.0..=1.0).contains(&efficiency) {
        return domain(format!("efficiency must lie in [0, 1], got {efficiency}"));
    }
    let n_det = detectors as usize;
    let mut table = Vec::with_capacity(n_max + 1);
    let mut fired = vec![0.0; n_det + 1];
    fired[0] = 1.0;
    table.push(fired.clone());
    for _ in 0..n_max {
        let mut next = vec![0.0; n_det + 1];
        for (j, &p) in fired.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let hit_new = efficiency * (n_det - j) as f64 / n_det as f64;
            next[j] += p * (1.0 - hit_new);
            if j < n_det {
                next[j + 1] += p * hit_new;
            }
        }
        fired = next;
        table.push(fired.clone());
    }
    Ok(table)
}

/// `sum_n P(k | n) p_n`.
pub fn oracle_click_prob(detectors: u32, clicks: u32, efficiency: f64, state: &FockVector) -> Result<f64> {
    if clicks > detectors {
        return domain(format!("click count {clicks} exceeds detector count {detectors}"));
    }
    let response = multiplex_response(detectors, efficiency, state.n_max())?;
    Ok(neumaier_sum(
        state
            .probabilities()
            .iter()
            .zip(&response)
            .map(|(p, r)| p * r[clicks as usize]),
    ))
}

/// Heralded signal distribution from the oracle, with its herald probability.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleHerald {
    pub state: FockVector,
    pub herald_probability: f64,
}

/// Signal mode of a TMSV after `clicks` idler clicks, built by weighting the
/// Schmidt coefficients `(1/(1+n)) (n/(1+n))^m` with the multiplex response.
pub fn oracle_herald_state(
    mean_photons: f64,
    efficiency: f64,
    detectors: u32,
    clicks: u32,
    n_max: usize,
) -> Result<OracleHerald> {
    if clicks > detectors {
        return domain(format!("click count {clicks} exceeds detector count {detectors}"));
    }
    // Schmidt weights are the marginal photon-number distribution of either mode.
    let schmidt = thermal_fock(mean_photons, n_max, 1.0)?;
    let tail = schmidt.trace_deficit().max(0.0);
    let response = multiplex_response(detectors, efficiency, n_max)?;
    let joint: Vec<f64> = schmidt
        .probabilities()
        .iter()
        .zip(&response)
        .map(|(w, r)| w * r[clicks as usize])
        .collect();
    let herald_probability = neumaier_sum(joint.iter().copied());
    if herald_probability <= 0.0 {
        return Err(Error::DegenerateHeralding { detectors, clicks });
    }
    // The response is at most one, so the conditional missing mass is at
    // most tail / Pr.
    let deficit = tail / herald_probability;
    let state = FockVector::new(
        joint.iter().map(|q| q / herald_probability).collect(),
        deficit,
        DEFAULT_TRACE_TOLERANCE,
    )?;
    Ok(OracleHerald {
        state,
        herald_probability,
    })
}

/// Receiver mode after the target beamsplitter, via the decomposition of
/// the thermal attenuator into pure loss `tau = kappa / (1 + n_B)` followed
/// by a quantum-limited amplifier of gain `1 + n_B`.
pub fn oracle_beamsplitter(signal: &FockVector, reflectivity: f64, background_mean: f64, n_max: usize) -> Result<FockVector> {
    check_channel(reflectivity, background_mean)?;
    let gain = 1.0 + background_mean;
    let tau = reflectivity / gain;
    let ln_fact = ln_factorials(n_max.max(signal.n_max()) + 1);
    let ln_choose = |n: usize, k: usize| ln_fact[n] - ln_fact[k] - ln_fact[n - k];

    // Pure loss: binomial thinning.
    let (ln_tau, ln_keep_out) = (tau.ln(), (-tau).ln_1p());
    let mut thinned = vec![0.0; n_max + 1];
    for (n, &p) in signal.probabilities().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (j, slot) in thinned.iter_mut().enumerate().take(n.min(n_max) + 1) {
            let ln_w = ln_choose(n, j) + j as f64 * ln_tau + (n - j) as f64 * ln_keep_out;
            *slot += p * ln_w.exp();
        }
    }

    // Quantum-limited amplifier: |n> -> C(n+k, n) G^-(n+1) (1 - 1/G)^k |n+k>.
    let amplified = if background_mean == 0.0 {
        thinned
    } else {
        let ln_gain = gain.ln();
        let ln_excess = (-1.0 / gain).ln_1p();
        let mut out = vec![0.0; n_max + 1];
        for (n, &p) in thinned.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for k in 0..=(n_max - n) {
                let ln_w = ln_choose(n + k, n) - (n + 1) as f64 * ln_gain + k as f64 * ln_excess;
                out[n + k] += p * ln_w.exp();
            }
        }
        out
    };
    FockVector::from_truncated(amplified, DEFAULT_TRACE_TOLERANCE)
}

/// Same channel computed from the two-mode beamsplitter matrix elements
/// `|<j, a+b-j| U |a, b>|^2` with a thermal environment of mean
/// `n_B / (1 - kappa)`. Only for small truncations.
pub fn oracle_beamsplitter_unitary(signal: &FockVector, reflectivity: f64, background_mean: f64, n_max: usize) -> Result<FockVector> {
    check_channel(reflectivity, background_mean)?;
    if n_max > FULL_UNITARY_N_MAX || signal.n_max() > FULL_UNITARY_N_MAX {
        return domain(format!("full unitary route is limited to n_max <= {FULL_UNITARY_N_MAX}"));
    }
    let env_mean = background_mean / (1.0 - reflectivity);
    let environment = thermal_fock(env_mean, n_max, DEFAULT_TRACE_TOLERANCE)?;
    let ln_fact = ln_factorials(2 * FULL_UNITARY_N_MAX + 1);
    let mut out = vec![0.0; n_max + 1];
    for (a, &pa) in signal.probabilities().iter().enumerate() {
        for (b, &pb) in environment.probabilities().iter().enumerate() {
            let weight = pa * pb;
            if weight == 0.0 {
                continue;
            }
            for (j, slot) in out.iter_mut().enumerate().take((a + b).min(n_max) + 1) {
                let amp = beamsplitter_amplitude(a, b, j, reflectivity, &ln_fact);
                *slot += weight * amp * amp;
            }
        }
    }
    let input_deficit = signal.trace_deficit() + environment.trace_deficit();
    let deficit = 1.0 - neumaier_sum(out.iter().copied());
    FockVector::new(out, deficit, DEFAULT_TRACE_TOLERANCE + input_deficit.abs())
}

/// Real part (up to a global phase) of `<j, a+b-j| U |a, b>` where a signal
/// photon stays in the return mode with amplitude `sqrt(kappa)`.
pub fn beamsplitter_amplitude(a: usize, b: usize, j: usize, reflectivity: f64, ln_fact: &[f64]) -> f64 {
    let n = a + b;
    if j > n {
        return 0.0;
    }
    let (ln_c, ln_s) = (0.5 * reflectivity.ln(), 0.5 * (-reflectivity).ln_1p());
    let ln_norm = 0.5 * (ln_fact[j] + ln_fact[n - j] - ln_fact[a] - ln_fact[b]);
    let ln_choose = |n: usize, k: usize| ln_fact[n] - ln_fact[k] - ln_fact[n - k];
    let lo = j.saturating_sub(b);
    let hi = a.min(j);
    if lo > hi {
        return 0.0;
    }
    let terms = (lo..=hi).map(|p| {
        let q = j - p;
        let ln_mag = ln_norm
            + ln_choose(a, p)
            + ln_choose(b, q)
            + (b + 2 * p - j) as f64 * ln_c
            + (a + j - 2 * p) as f64 * ln_s;
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        sign * ln_mag.exp()
    });
    neumaier_sum(terms)
}

fn check_channel(reflectivity: f64, background_mean: f64) -> Result<()> {
    if !(reflectivity > 0.0 && reflectivity < 1.0) {
        return domain(format!("reflectivity must lie in (0, 1), got {reflectivity}"));
    }
    if !(background_mean.is_finite() && background_mean >= 0.0) {
        return domain(format!("background mean must be non-negative, got {background_mean}"));
    }
    Ok(())
}

/// `W(q, 0) = pi^-1 exp(-q^2) sum_n p_n (-1)^n L_n(2 q^2)`.
pub fn oracle_wigner(state: &FockVector, q: f64) -> f64 {
    let x = 2.0 * q * q;
    let mut acc = 0.0;
    let (mut l_prev, mut l_curr) = (0.0, 1.0);
    for (n, &p) in state.probabilities().iter().enumerate() {
        if n > 0 {
            let l_next = ((2 * n - 1) as f64 - x) * l_curr / n as f64
                - (n - 1) as f64 / n as f64 * l_prev;
            l_prev = l_curr;
            l_curr = l_next;
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * p * l_curr;
    }
    acc * (-q * q).exp() / PI
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = DEFAULT_TRACE_TOLERANCE;

    #[test]
    fn single_detector_response_is_one_minus_loss() {
        let r = multiplex_response(1, 0.3, 6).unwrap();
        for (n, row) in r.iter().enumerate() {
            assert!((row[0] - 0.7f64.powi(n as i32)).abs() < 1e-15);
            assert!((row[0] + row[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn response_respects_fock_support() {
        let r = multiplex_response(4, 0.8, 10).unwrap();
        for (n, row) in r.iter().enumerate() {
            for (k, &p) in row.iter().enumerate() {
                if k > n {
                    assert_eq!(p, 0.0);
                }
            }
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn vacuum_never_clicks() {
        let v = fock_state(0, 10).unwrap();
        for k in 1..=3 {
            assert_eq!(oracle_click_prob(3, k, 0.9, &v).unwrap(), 0.0);
        }
    }

    #[test]
    fn thermal_single_click() {
        let t = thermal_fock(1.0, DEFAULT_N_MAX, TOL).unwrap();
        let p = oracle_click_prob(1, 1, 0.95, &t).unwrap();
        assert!((p - (1.0 - 1.0 / 1.95)).abs() < 1e-9);
    }

    #[test]
    fn herald_single_click_has_no_vacuum() {
        let h = oracle_herald_state(1.0, 0.95, 1, 1, DEFAULT_N_MAX).unwrap();
        assert_eq!(h.state.probabilities()[0], 0.0);
    }

    #[test]
    fn herald_without_measurement_is_thermal() {
        let h = oracle_herald_state(1.3, 0.0, 2, 0, DEFAULT_N_MAX).unwrap();
        let t = thermal_fock(1.3, DEFAULT_N_MAX, TOL).unwrap();
        for (a, b) in h.state.probabilities().iter().zip(t.probabilities()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((h.herald_probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_is_reported() {
        let err = thermal_fock(5.0, 20, TOL).unwrap_err();
        assert!(matches!(err, Error::TruncationInsufficient { .. }));
        let err = oracle_herald_state(5.0, 0.9, 2, 2, 30).unwrap_err();
        assert!(matches!(err, Error::TruncationInsufficient { .. }));
    }

    #[test]
    fn beamsplitter_amplitudes_are_unitary() {
        let ln_fact = ln_factorials(2 * FULL_UNITARY_N_MAX + 1);
        for a in 0..6 {
            for b in 0..6 {
                let norm: f64 = (0..=a + b)
                    .map(|j| beamsplitter_amplitude(a, b, j, 0.3, &ln_fact).powi(2))
                    .sum();
                assert!((norm - 1.0).abs() < 1e-13, "a={a} b={b}: {norm}");
            }
        }
        // Two photons on a balanced splitter never leave one per port.
        let hom = beamsplitter_amplitude(1, 1, 1, 0.5, &ln_fact);
        assert!(hom.abs() < 1e-15);
    }

    #[test]
    fn vacuum_signal_returns_background() {
        let v = fock_state(0, 300).unwrap();
        let out = oracle_beamsplitter(&v, 0.4, 3.0, 300).unwrap();
        let t = thermal_fock(3.0, 300, TOL).unwrap();
        for (a, b) in out.probabilities().iter().zip(t.probabilities()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn thermal_signal_kernel_matches_shifted_thermal() {
        let s = thermal_fock(1.0, 300, TOL).unwrap();
        let out = oracle_beamsplitter(&s, 0.1, 3.0, 300).unwrap();
        let t = thermal_fock(3.1, 300, TOL).unwrap();
        for (a, b) in out.probabilities().iter().zip(t.probabilities()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn unitary_route_matches_kernel() {
        let s = thermal_fock(0.4, 40, TOL).unwrap();
        let u = oracle_beamsplitter_unitary(&s, 0.3, 0.2, 40).unwrap();
        let k = oracle_beamsplitter(&s, 0.3, 0.2, 40).unwrap();
        for (a, b) in u.probabilities().iter().zip(k.probabilities()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(oracle_beamsplitter_unitary(&s, 0.3, 0.2, 41).is_err());
    }

    #[test]
    fn wigner_reference_values() {
        let v = fock_state(0, 5).unwrap();
        assert!((oracle_wigner(&v, 0.0) - 1.0 / PI).abs() < 1e-15);
        let one = fock_state(1, 5).unwrap();
        assert!((oracle_wigner(&one, 0.0) + 1.0 / PI).abs() < 1e-15);
        let t = thermal_fock(1.0, DEFAULT_N_MAX, TOL).unwrap();
        assert!((oracle_wigner(&t, 0.0) - 1.0 / (3.0 * PI)).abs() < 1e-9);
    }

    #[test]
    fn coherent_distribution_is_poisson() {
        let c = coherent_fock(2.0, 60, TOL).unwrap();
        assert!((c.mean() - 2.0).abs() < 1e-12);
        assert!((c.probabilities()[0] - (-2.0f64).exp()).abs() < 1e-16);
    }
}
