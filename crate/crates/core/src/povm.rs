//! Click statistics of a multiplex of `N` identical on/off detectors.
//!
//! The `k`-click POVM element is diagonal in the Fock basis and, for the
//! states in [`crate::states`], its expectation value reduces to an
//! alternating sum of normal-ordered moments `<:exp(-s n):>`. For thermal
//! components that alternating sum is a `k`-th forward difference of
//! `1 / (1 + s m)`, which has an exact product form free of cancellation.
//! Displaced-thermal states go through the compensated alternating sum with
//! an explicit rounding-error guard.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::{ln_binomial, DoubleDouble, NeumaierSum, DD_EPSILON};
use crate::states::{DisplacedThermal, StateModel};

/// Largest `n` accepted by [`binomial`].
pub const MAX_EXACT_BINOMIAL: u32 = 64;
/// Largest idler multiplex used for heralding; the signed-mixture weights
/// are an alternating sum and lose precision beyond this.
pub const MAX_HERALD_DETECTORS: u32 = 64;
/// Largest multiplex accepted for click statistics.
pub const MAX_DETECTORS: u32 = 1_000_000;
/// Probabilities may leave `[0, 1]` by at most this much before clamping.
pub const EXCURSION_TOLERANCE: f64 = 1e-10;

/// Exact binomial coefficient for `n <= 64`.
pub fn binomial(n: u32, k: u32) -> Result<u64> {
    if n > MAX_EXACT_BINOMIAL {
        return domain(format!("binomial: n = {n} exceeds {MAX_EXACT_BINOMIAL}"));
    }
    if k > n {
        return domain(format!("binomial: k = {k} exceeds n = {n}"));
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    // r * (n - i) is divisible by (i + 1) at every step; u128 absorbs the
    // intermediate product for n <= 64.
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    Ok(r as u64)
}

fn binomial_f64(n: u32, k: u32) -> f64 {
    match binomial(n, k) {
        Ok(b) => b as f64,
        Err(_) => ln_binomial(n as u64, k as u64).exp(),
    }
}

/// `N` identical click detectors sharing efficiency `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickMultiplex {
    detector_count: u32,
    efficiency: f64,
}

impl ClickMultiplex {
    pub fn new(detector_count: u32, efficiency: f64) -> Result<Self> {
        if detector_count == 0 || detector_count > MAX_DETECTORS {
            return domain(format!(
                "detector count must lie in [1, {MAX_DETECTORS}], got {detector_count}"
            ));
        }
        if !(0.0..=1.0).contains(&efficiency) {
            return domain(format!("efficiency must lie in [0, 1], got {efficiency}"));
        }
        Ok(Self {
            detector_count,
            efficiency,
        })
    }

    pub fn single(efficiency: f64) -> Result<Self> {
        Self::new(1, efficiency)
    }

    pub fn detector_count(&self) -> u32 {
        self.detector_count
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    /// Moment argument `eta (1 - l/N)` for the `l`-th term.
    #[inline]
    fn attenuation(&self, l: u32) -> f64 {
        self.efficiency * (1.0 - l as f64 / self.detector_count as f64)
    }

    fn check_outcome(&self, k: u32) -> Result<()> {
        if k > self.detector_count {
            return domain(format!(
                "click count {k} exceeds detector count {}",
                self.detector_count
            ));
        }
        Ok(())
    }
}

/// `<:exp(-s n):>` for `s` in `[0, 1]`.
pub fn normal_ordered_moment(state: &StateModel, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return domain(format!("moment argument must lie in [0, 1], got {s}"));
    }
    Ok(moment_unchecked(state, s))
}

fn moment_unchecked(state: &StateModel, s: f64) -> f64 {
    match state {
        StateModel::Mixture(m) => m
            .precise_components()
            .iter()
            .map(|c| c.weight / (c.mean * s + 1.0))
            .sum::<DoubleDouble>()
            .to_f64(),
        StateModel::Displaced(d) => displaced_moment(d, s),
    }
}

#[inline]
fn displaced_moment(d: &DisplacedThermal, s: f64) -> f64 {
    let denom = 1.0 + s * d.thermal_mean();
    (-s * d.coherent_mean() / denom).exp() / denom
}

/// Probability of `k` clicks on `N` detectors for a thermal state of mean
/// `mean`, evaluated as the product form of the forward difference:
///
/// `(eta m)^k prod_{j<k} (1 - j/N) / prod_{j<=k} (1 + eta m (1 - j/N))`.
///
/// Callers guarantee `k <= N`.
pub(crate) fn thermal_click_probability(detectors: u32, k: u32, efficiency: f64, mean: f64) -> f64 {
    thermal_click_probability_precise(detectors, k, efficiency, mean.into()).to_f64()
}

fn thermal_click_probability_precise(detectors: u32, k: u32, efficiency: f64, mean: DoubleDouble) -> DoubleDouble {
    let n = detectors as f64;
    let em = mean * efficiency;
    let mut p = (em + 1.0).recip();
    for j in 0..k {
        let remaining = DoubleDouble::ONE - DoubleDouble::from(j as f64) / n;
        let next = DoubleDouble::ONE - DoubleDouble::from((j + 1) as f64) / n;
        p = p * em * remaining / (em * next + 1.0);
    }
    p
}

/// Binomial click statistics of a pure coherent state: detectors fire
/// independently with probability `1 - exp(-eta mu / N)`.
fn coherent_click_probability(mux: &ClickMultiplex, k: u32, mean: f64) -> f64 {
    let n = mux.detector_count;
    let rate = mux.efficiency * mean / n as f64;
    if rate == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let p_click = -(-rate).exp_m1();
    let ln = ln_binomial(n as u64, k as u64) + k as f64 * p_click.ln() - (n - k) as f64 * rate;
    ln.exp()
}

fn clamp_probability(p: f64, what: impl FnOnce() -> String) -> Result<f64> {
    if !p.is_finite() || !(-EXCURSION_TOLERANCE..=1.0 + EXCURSION_TOLERANCE).contains(&p) {
        let excursion = if p < 0.0 { p } else { p - 1.0 };
        return Err(Error::NumericInstability {
            what: what(),
            excursion,
        });
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Literal alternating-sum evaluation
/// `C(N,k) sum_l C(k,l) (-1)^(k-l) <:exp(-eta (1 - l/N) n):>`
/// with compensated summation. Returns an instability error when the
/// rounding-error bound of the cancelling terms exceeds the excursion
/// tolerance.
pub fn click_probability_alternating(mux: &ClickMultiplex, k: u32, state: &StateModel) -> Result<f64> {
    mux.check_outcome(k)?;
    let mut acc = NeumaierSum::new();
    let mut magnitude = 0.0;
    for l in 0..=k {
        let c = binomial_f64(k, l);
        let term = c * moment_unchecked(state, mux.attenuation(l));
        magnitude += term.abs();
        if (k - l).is_multiple_of(2) {
            acc.add(term);
        } else {
            acc.add(-term);
        }
    }
    let prefactor = binomial_f64(mux.detector_count, k);
    let bound = prefactor * magnitude * (k as f64 + 2.0) * f64::EPSILON;
    if bound > EXCURSION_TOLERANCE {
        return Err(Error::NumericInstability {
            what: format!(
                "alternating click sum N={}, k={k} cancels beyond double precision",
                mux.detector_count
            ),
            excursion: bound,
        });
    }
    clamp_probability(prefactor * acc.value(), || {
        format!("click probability N={}, k={k}", mux.detector_count)
    })
}

/// `Tr(Pi_{N,k} rho)`.
pub fn click_probability(mux: &ClickMultiplex, k: u32, state: &StateModel) -> Result<f64> {
    mux.check_outcome(k)?;
    let raw = match state {
        StateModel::Mixture(m) => m
            .precise_components()
            .iter()
            .map(|c| {
                c.weight
                    * thermal_click_probability_precise(mux.detector_count, k, mux.efficiency, c.mean)
            })
            .sum::<DoubleDouble>()
            .to_f64(),
        StateModel::Displaced(d) if d.thermal_mean() == 0.0 => {
            coherent_click_probability(mux, k, d.coherent_mean())
        }
        StateModel::Displaced(_) => return click_probability_alternating(mux, k, state),
    };
    clamp_probability(raw, || {
        format!("click probability N={}, k={k}", mux.detector_count)
    })
}

/// All `N + 1` outcome probabilities.
pub fn click_distribution(mux: &ClickMultiplex, state: &StateModel) -> Result<Vec<f64>> {
    (0..=mux.detector_count)
        .map(|k| click_probability(mux, k, state))
        .collect()
}

/// Large-`N` limit of the click statistics, `<:(eta n)^k exp(-eta n) / k!:>`.
pub fn poisson_limit_reference(k: u32, efficiency: f64, state: &StateModel) -> Result<f64> {
    if !(0.0..=1.0).contains(&efficiency) {
        return domain(format!("efficiency must lie in [0, 1], got {efficiency}"));
    }
    match state {
        StateModel::Mixture(m) => Ok(m
            .precise_components()
            .iter()
            .map(|c| {
                let em = c.mean * efficiency;
                let scale = (em + 1.0).recip();
                c.weight * scale * (em * scale).powu(k)
            })
            .sum::<DoubleDouble>()
            .to_f64()),
        StateModel::Displaced(d) if d.thermal_mean() == 0.0 => {
            let x = efficiency * d.coherent_mean();
            let ln_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
            Ok(if x == 0.0 {
                if k == 0 { 1.0 } else { 0.0 }
            } else {
                (k as f64 * x.ln() - x - ln_fact).exp()
            })
        }
        StateModel::Displaced(_) => Err(Error::Unsupported(
            "Poisson-limit click statistics of a displaced-thermal state".into(),
        )),
    }
}

/// Fock-diagonal coefficients `<n|Pi_{N,k}|n>` for `n` in `0..=n_max`.
pub fn povm_fock_diagonal(detectors: u32, k: u32, efficiency: f64, n_max: usize) -> Result<Vec<f64>> {
    let mux = ClickMultiplex::new(detectors, efficiency)?;
    mux.check_outcome(k)?;
    if detectors > MAX_EXACT_BINOMIAL {
        return domain(format!(
            "Fock-diagonal POVM needs exact binomials, so N <= {MAX_EXACT_BINOMIAL}; got {detectors}"
        ));
    }
    let prefactor = binomial_f64(detectors, k);
    // Exact binomials and powers in double-double; the cancellation bound
    // uses the matching unit roundoff.
    let coefficients: Vec<DoubleDouble> = (0..=k)
        .map(|l| {
            let c = DoubleDouble::from(binomial(k, l).expect("k <= detectors <= 64 here"));
            if (k - l).is_multiple_of(2) { c } else { -c }
        })
        .collect();
    let magnitude: f64 = coefficients.iter().map(|c| c.abs().to_f64()).sum();
    let bound = prefactor * magnitude * (k as f64 + 2.0) * DD_EPSILON;
    if bound > EXCURSION_TOLERANCE {
        return Err(Error::NumericInstability {
            what: format!("Fock-diagonal POVM N={detectors}, k={k}"),
            excursion: bound,
        });
    }
    let survival: Vec<DoubleDouble> = (0..=k)
        .map(|l| {
            let remaining = DoubleDouble::ONE - DoubleDouble::from(l as f64) / detectors as f64;
            DoubleDouble::ONE - remaining * efficiency
        })
        .collect();
    (0..=n_max)
        .map(|n| {
            // At most n detectors can fire on n photons.
            if n < k as usize {
                return Ok(0.0);
            }
            let sum: DoubleDouble = coefficients
                .iter()
                .zip(&survival)
                .map(|(&c, base)| c * base.powu(n as u32))
                .sum();
            clamp_probability(prefactor * sum.to_f64(), || {
                format!("Fock-diagonal POVM N={detectors}, k={k}, n={n}")
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{herald_state, SignedThermalMixture};

    fn thermal(m: f64) -> StateModel {
        StateModel::thermal(m).unwrap()
    }

    fn pascal_row(n: usize) -> Vec<u64> {
        let mut row = vec![1u64];
        for _ in 0..n {
            let mut next = vec![1u64; row.len() + 1];
            for i in 1..row.len() {
                next[i] = row[i - 1] + row[i];
            }
            row = next;
        }
        row
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(4, 2).unwrap(), 6);
        assert_eq!(binomial(10, 0).unwrap(), 1);
        assert_eq!(binomial(0, 0).unwrap(), 1);
    }

    #[test]
    fn binomial_matches_pascal_rule() {
        let row = pascal_row(64);
        for k in 0..=64u32 {
            assert_eq!(binomial(64, k).unwrap(), row[k as usize]);
        }
        assert_eq!(binomial(64, 32).unwrap(), 1_832_624_140_942_590_534);
    }

    #[test]
    fn binomial_domain_errors() {
        assert!(binomial(3, 4).is_err());
        assert!(binomial(65, 1).is_err());
    }

    #[test]
    fn multiplex_validation() {
        assert!(ClickMultiplex::new(0, 0.5).is_err());
        assert!(ClickMultiplex::new(2, 1.5).is_err());
        assert!(ClickMultiplex::new(2, -0.1).is_err());
        assert!(ClickMultiplex::new(MAX_DETECTORS + 1, 0.5).is_err());
    }

    #[test]
    fn moment_examples() {
        assert_eq!(normal_ordered_moment(&thermal(0.0), 0.9).unwrap(), 1.0);
        assert!((normal_ordered_moment(&thermal(1.0), 1.0).unwrap() - 0.5).abs() < 1e-15);
        let coherent = StateModel::coherent(1.0).unwrap();
        let m = normal_ordered_moment(&coherent, 1.0).unwrap();
        assert!((m - (-1.0f64).exp()).abs() < 1e-15);
        assert!(normal_ordered_moment(&coherent, 1.5).is_err());
        assert!(normal_ordered_moment(&coherent, -0.5).is_err());
    }

    #[test]
    fn single_detector_examples() {
        let mux = ClickMultiplex::single(0.95).unwrap();
        assert_eq!(click_probability(&mux, 1, &StateModel::vacuum()).unwrap(), 0.0);
        let p = click_probability(&mux, 1, &thermal(1.0)).unwrap();
        assert!((p - (1.0 - 1.0 / 1.95)).abs() < 1e-15);
        let d = click_distribution(&mux, &thermal(1.0)).unwrap();
        assert!((d[0] - 0.512_821).abs() < 1e-6 && (d[1] - 0.487_179).abs() < 1e-6);
        assert!(click_probability(&mux, 2, &thermal(1.0)).is_err());
    }

    #[test]
    fn distribution_on_vacuum() {
        let mux = ClickMultiplex::new(2, 0.7).unwrap();
        assert_eq!(click_distribution(&mux, &StateModel::vacuum()).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn product_form_matches_alternating_sum() {
        for n in 1..=8u32 {
            let mux = ClickMultiplex::new(n, 0.9).unwrap();
            for k in 0..=n {
                for m in [0.1, 1.0, 5.0] {
                    let a = click_probability(&mux, k, &thermal(m)).unwrap();
                    let b = click_probability_alternating(&mux, k, &thermal(m)).unwrap();
                    assert!((a - b).abs() < 1e-12, "N={n} k={k} m={m}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn coherent_binomial_matches_alternating_sum() {
        let state = StateModel::coherent(2.0).unwrap();
        for n in 1..=6u32 {
            let mux = ClickMultiplex::new(n, 0.8).unwrap();
            for k in 0..=n {
                let a = click_probability(&mux, k, &state).unwrap();
                let b = click_probability_alternating(&mux, k, &state).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn alternating_sum_reports_cancellation() {
        let mux = ClickMultiplex::new(64, 0.9).unwrap();
        let state = StateModel::from(crate::states::DisplacedThermal::new(1.0, 1.0).unwrap());
        let err = click_probability_alternating(&mux, 32, &state).unwrap_err();
        assert!(matches!(err, Error::NumericInstability { .. }));
    }

    #[test]
    fn wide_multiplex_stays_complete() {
        // Worst case at the herald cap: the product form keeps full precision.
        let mux = ClickMultiplex::new(64, 0.9).unwrap();
        for m in [0.1, 1.0, 5.0, 50.0] {
            let d = click_distribution(&mux, &thermal(m)).unwrap();
            let total: f64 = d.iter().sum();
            assert!((total - 1.0).abs() < 1e-13, "m={m}: {total}");
        }
    }

    #[test]
    fn heralded_mixture_click_probabilities_are_valid() {
        let h = herald_state(1.0, 0.9, 4, 2).unwrap();
        let mux = ClickMultiplex::new(3, 0.8).unwrap();
        let d = click_distribution(&mux, &h.state_model()).unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(d.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn poisson_reference_examples() {
        let p = poisson_limit_reference(0, 0.7, &thermal(2.0)).unwrap();
        assert!((p - 1.0 / 2.4).abs() < 1e-15);
        assert_eq!(poisson_limit_reference(0, 0.7, &StateModel::vacuum()).unwrap(), 1.0);
        // Unit efficiency counts photons: Pr(1) is the thermal one-photon probability.
        let p = poisson_limit_reference(1, 1.0, &thermal(1.0)).unwrap();
        assert!((p - 0.25).abs() < 1e-15);
        let d = StateModel::from(crate::states::DisplacedThermal::new(1.0, 1.0).unwrap());
        assert!(matches!(poisson_limit_reference(1, 0.5, &d), Err(Error::Unsupported(_))));
    }

    #[test]
    fn fock_diagonal_examples() {
        let eta = 0.37;
        let d = povm_fock_diagonal(1, 0, eta, 10).unwrap();
        for (n, c) in d.iter().enumerate() {
            assert!((c - (1.0 - eta).powi(n as i32)).abs() < 1e-15);
        }
        assert_eq!(povm_fock_diagonal(2, 2, 0.8, 1).unwrap()[1], 0.0);
        // One photon, two detectors, unit efficiency: exactly one fires.
        assert!((povm_fock_diagonal(2, 1, 1.0, 1).unwrap()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fock_diagonal_reduces_to_single_detector_click() {
        let eta = 0.6;
        let d = povm_fock_diagonal(1, 1, eta, 12).unwrap();
        let state = SignedThermalMixture::thermal(0.8).unwrap();
        let truncated: f64 = d
            .iter()
            .enumerate()
            .map(|(n, c)| c * state.fock_probability(n))
            .sum();
        let closed = click_probability(&ClickMultiplex::single(eta).unwrap(), 1, &state.into()).unwrap();
        // Tail beyond n = 12 of thermal(0.8) with click coefficient <= 1.
        let tail = (0.8f64 / 1.8).powi(13);
        assert!((truncated - closed).abs() < tail);
    }
}
