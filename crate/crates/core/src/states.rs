//! Signal-mode states: thermal mixtures produced by heralding a two-mode
//! squeezed vacuum, and displaced-thermal states for coherent probes.
//!
//! Every TMSV-derived state is kept as an affine combination of thermal
//! density matrices. The weights may be negative, but the photon-number
//! distribution they produce must stay non-negative. Photon statistics and
//! Wigner slices follow from the thermal kernel in closed form, so nothing
//! here truncates the Fock space.
//!
//! Wigner functions use the convention `W_vac(q, p) = exp(-q^2 - p^2) / pi`.

use std::f64::consts::PI;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{domain, Error, Result};
use crate::numeric::{DoubleDouble, DD_EPSILON};
use crate::povm::{binomial, thermal_click_probability, MAX_HERALD_DETECTORS};

/// Tolerance on the trace of a signed thermal mixture.
pub const TRACE_TOLERANCE: f64 = 1e-12;
/// Most negative photon-number probability tolerated by the physicality check.
pub const PHYSICALITY_TOLERANCE: f64 = 1e-12;
/// Largest photon number inspected by the physicality check. Past this the
/// thermal tails are monotone.
pub const PHYSICALITY_CHECK_MAX: usize = 200;
/// Largest relative rounding level `u * sum |w|` accepted for a heralded
/// state, where `u` is the unit roundoff of the internal double-double
/// arithmetic. Linear functionals of the state carry absolute errors of
/// about this size.
pub const CANCELLATION_BUDGET: f64 = 1e-13;

/// One thermal state `rho[mean]` with a signed weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalComponent {
    pub weight: f64,
    pub mean: f64,
}

impl ThermalComponent {
    /// Probability of `n` photons in the (unweighted) thermal state.
    #[inline]
    pub fn fock_probability(&self, n: usize) -> f64 {
        let m = self.mean;
        (m / (1.0 + m)).powi(n as i32) / (1.0 + m)
    }
}

/// Extended-precision component. Heralded mixtures alternate in sign with
/// weights up to ~1e7 on ordinary parameters, so every functional of the
/// mixture is evaluated from these rather than from the rounded view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PreciseComponent {
    pub weight: DoubleDouble,
    pub mean: DoubleDouble,
}

impl PreciseComponent {
    fn rounded(&self) -> ThermalComponent {
        ThermalComponent {
            weight: self.weight.to_f64(),
            mean: self.mean.to_f64(),
        }
    }

    /// Weighted `p_n` of this component.
    fn weighted_fock(&self, n: usize) -> DoubleDouble {
        let scale = (self.mean + 1.0).recip();
        self.weight * scale * (self.mean * scale).powu(n as u32)
    }
}

/// Affine combination of thermal states with unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedThermalMixture {
    components: Vec<ThermalComponent>,
    precise: Vec<PreciseComponent>,
}

impl Serialize for SignedThermalMixture {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("SignedThermalMixture", 1)?;
        st.serialize_field("components", &self.components)?;
        st.end()
    }
}

impl SignedThermalMixture {
    /// Validates trace, component ranges and the physicality spot-check.
    pub fn new(components: Vec<ThermalComponent>) -> Result<Self> {
        Self::from_precise(
            components
                .iter()
                .map(|c| PreciseComponent {
                    weight: c.weight.into(),
                    mean: c.mean.into(),
                })
                .collect(),
        )
    }

    pub(crate) fn from_precise(precise: Vec<PreciseComponent>) -> Result<Self> {
        if precise.is_empty() {
            return Err(Error::InvalidState("mixture has no components".into()));
        }
        let components: Vec<ThermalComponent> = precise.iter().map(PreciseComponent::rounded).collect();
        for c in &components {
            if !c.weight.is_finite() {
                return Err(Error::InvalidState(format!("non-finite weight {}", c.weight)));
            }
            if !(c.mean.is_finite() && c.mean >= 0.0) {
                return Err(Error::InvalidState(format!("invalid thermal mean {}", c.mean)));
            }
        }
        let mixture = Self { components, precise };
        let trace = mixture.trace();
        if (trace - 1.0).abs() > TRACE_TOLERANCE {
            return Err(Error::InvalidState(format!("trace {trace} differs from one")));
        }
        if mixture.precise.len() > 1 {
            for n in 0..=PHYSICALITY_CHECK_MAX {
                let p = mixture.fock_probability(n);
                if p < -PHYSICALITY_TOLERANCE {
                    return Err(Error::InvalidState(format!(
                        "negative photon-number probability {p:e} at n = {n}"
                    )));
                }
            }
        }
        Ok(mixture)
    }

    pub fn thermal(mean: f64) -> Result<Self> {
        if !(mean.is_finite() && mean >= 0.0) {
            return domain(format!("thermal mean must be finite and non-negative, got {mean}"));
        }
        Ok(Self {
            components: vec![ThermalComponent { weight: 1.0, mean }],
            precise: vec![PreciseComponent {
                weight: DoubleDouble::ONE,
                mean: mean.into(),
            }],
        })
    }

    pub fn vacuum() -> Self {
        Self::thermal(0.0).expect("zero mean is valid")
    }

    /// Components rounded to double precision.
    pub fn components(&self) -> &[ThermalComponent] {
        &self.components
    }

    pub(crate) fn precise_components(&self) -> &[PreciseComponent] {
        &self.precise
    }

    /// `sum |w|`: the factor by which relative rounding errors in the
    /// components are amplified in any linear functional of the state.
    pub fn weight_magnitude(&self) -> f64 {
        self.components.iter().map(|c| c.weight.abs()).sum()
    }

    pub fn trace(&self) -> f64 {
        self.precise.iter().map(|c| c.weight).sum::<DoubleDouble>().to_f64()
    }

    /// Applies an affine map to every component mean, keeping the weights.
    pub(crate) fn map_means(&self, f: impl Fn(DoubleDouble) -> DoubleDouble) -> Self {
        let precise: Vec<PreciseComponent> = self
            .precise
            .iter()
            .map(|c| PreciseComponent {
                weight: c.weight,
                mean: f(c.mean),
            })
            .collect();
        Self {
            components: precise.iter().map(PreciseComponent::rounded).collect(),
            precise,
        }
    }

    pub fn fock_probability(&self, n: usize) -> f64 {
        self.precise.iter().map(|c| c.weighted_fock(n)).sum::<DoubleDouble>().to_f64()
    }

    pub fn mean(&self) -> f64 {
        self.precise.iter().map(|c| c.weight * c.mean).sum::<DoubleDouble>().to_f64()
    }

    /// `<n^2>` using `2m^2 + m` per thermal component.
    pub fn second_moment(&self) -> f64 {
        self.precise
            .iter()
            .map(|c| c.weight * c.mean * (c.mean * 2.0 + 1.0))
            .sum::<DoubleDouble>()
            .to_f64()
    }
}

/// Coherent amplitude `|beta|^2 = coherent_mean` on top of thermal noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacedThermal {
    coherent_mean: f64,
    thermal_mean: f64,
}

impl DisplacedThermal {
    pub fn new(coherent_mean: f64, thermal_mean: f64) -> Result<Self> {
        if !(coherent_mean.is_finite() && coherent_mean >= 0.0) {
            return domain(format!("coherent mean must be non-negative, got {coherent_mean}"));
        }
        if !(thermal_mean.is_finite() && thermal_mean >= 0.0) {
            return domain(format!("thermal mean must be non-negative, got {thermal_mean}"));
        }
        Ok(Self { coherent_mean, thermal_mean })
    }

    /// Pure coherent state with `|alpha|^2 = mean`.
    pub fn coherent(mean: f64) -> Result<Self> {
        Self::new(mean, 0.0)
    }

    pub fn coherent_mean(&self) -> f64 {
        self.coherent_mean
    }

    pub fn thermal_mean(&self) -> f64 {
        self.thermal_mean
    }
}

/// The closed set of state models understood by the POVM calculus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum StateModel {
    Mixture(SignedThermalMixture),
    Displaced(DisplacedThermal),
}

impl StateModel {
    pub fn vacuum() -> Self {
        Self::Mixture(SignedThermalMixture::vacuum())
    }

    pub fn thermal(mean: f64) -> Result<Self> {
        SignedThermalMixture::thermal(mean).map(Self::Mixture)
    }

    pub fn coherent(mean: f64) -> Result<Self> {
        DisplacedThermal::coherent(mean).map(Self::Displaced)
    }
}

impl From<SignedThermalMixture> for StateModel {
    fn from(m: SignedThermalMixture) -> Self {
        Self::Mixture(m)
    }
}

impl From<DisplacedThermal> for StateModel {
    fn from(d: DisplacedThermal) -> Self {
        Self::Displaced(d)
    }
}

/// Parameters of a heralding event: TMSV mean, idler multiplex, click count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeraldParams {
    pub mean_photons: f64,
    pub efficiency: f64,
    pub detectors: u32,
    pub clicks: u32,
}

/// Signal mode conditioned on `clicks` out of `detectors` idler clicks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeraldedState {
    pub state: SignedThermalMixture,
    pub herald_probability: f64,
    pub params: HeraldParams,
}

impl HeraldedState {
    pub fn state_model(&self) -> StateModel {
        StateModel::Mixture(self.state.clone())
    }
}

/// Marginal of either TMSV mode: a thermal state with the unconditioned mean.
pub fn tmsv_marginal(mean_photons: f64) -> Result<SignedThermalMixture> {
    if !(mean_photons.is_finite() && mean_photons >= 0.0) {
        return domain(format!("TMSV mean must be non-negative, got {mean_photons}"));
    }
    SignedThermalMixture::thermal(mean_photons)
}

/// `sinh^2 r` for squeezing amplitude `r`.
pub fn mean_from_squeezing(r: f64) -> f64 {
    r.sinh().powi(2)
}

/// Scaled thermal mean of the `l`-th component left in the signal mode.
fn scaled_mean(mean_photons: f64, efficiency: f64, detectors: u32, l: u32) -> DoubleDouble {
    let nbar = DoubleDouble::from(mean_photons);
    let remaining = DoubleDouble::ONE - DoubleDouble::from(l as f64) / detectors as f64;
    let x = nbar * efficiency * remaining;
    (nbar - x) / (x + 1.0)
}

/// Conditions the signal mode of a TMSV on `clicks` clicks of an idler
/// multiplex with `detectors` detectors of efficiency `efficiency`.
pub fn herald_state(
    mean_photons: f64,
    efficiency: f64,
    detectors: u32,
    clicks: u32,
) -> Result<HeraldedState> {
    if !(mean_photons.is_finite() && mean_photons >= 0.0) {
        return domain(format!("TMSV mean must be non-negative, got {mean_photons}"));
    }
    if !(0.0..=1.0).contains(&efficiency) {
        return domain(format!("efficiency must lie in [0, 1], got {efficiency}"));
    }
    if detectors == 0 || detectors > MAX_HERALD_DETECTORS {
        return domain(format!(
            "herald detector count must lie in [1, {MAX_HERALD_DETECTORS}], got {detectors}"
        ));
    }
    if clicks > detectors {
        return domain(format!("clicks {clicks} exceed detectors {detectors}"));
    }

    // The herald probability is the thermal click probability of the idler,
    // evaluated in product form. It fixes the normalization without relying
    // on the alternating sum over components.
    let herald_probability =
        thermal_click_probability(detectors, clicks, efficiency, mean_photons);
    let binom = binomial(detectors, clicks)? as f64;
    let denominator = herald_probability * (1.0 + mean_photons) / binom;
    if denominator.abs() < 1e-300 {
        return Err(Error::DegenerateHeralding { detectors, clicks });
    }

    let raw: Vec<PreciseComponent> = (0..=clicks)
        .map(|l| {
            let mean = scaled_mean(mean_photons, efficiency, detectors, l);
            let coefficient = DoubleDouble::from(binomial(clicks, l).expect("l <= clicks <= 64"));
            let signed = if (clicks - l).is_multiple_of(2) { coefficient } else { -coefficient };
            PreciseComponent {
                weight: signed * (mean + 1.0),
                mean,
            }
        })
        .collect();

    let trace: DoubleDouble = raw.iter().map(|c| c.weight).sum();
    let magnitude: f64 = raw.iter().map(|c| c.weight.abs().to_f64()).sum();
    let rounding = DD_EPSILON * magnitude / denominator.abs();
    if rounding > CANCELLATION_BUDGET {
        return Err(Error::NumericInstability {
            what: format!("heralded state N={detectors}, k={clicks} cancels too strongly"),
            excursion: rounding,
        });
    }
    // The signed sum must reproduce the product-form denominator.
    let excursion = trace.to_f64() / denominator - 1.0;
    if excursion.abs() > TRACE_TOLERANCE {
        return Err(Error::NumericInstability {
            what: format!("heralded state N={detectors}, k={clicks} loses its trace"),
            excursion,
        });
    }
    let components = raw
        .into_iter()
        .map(|c| PreciseComponent {
            weight: c.weight / trace,
            mean: c.mean,
        })
        .collect();
    let state = SignedThermalMixture::from_precise(components)?;
    Ok(HeraldedState {
        state,
        herald_probability,
        params: HeraldParams {
            mean_photons,
            efficiency,
            detectors,
            clicks,
        },
    })
}

pub fn mean_photon(state: &StateModel) -> f64 {
    match state {
        StateModel::Mixture(m) => m.mean(),
        StateModel::Displaced(d) => d.coherent_mean + d.thermal_mean,
    }
}

/// `p_n` for `n` in `0..=n_max`. Displaced-thermal states have no closed
/// form here; the oracle builds them in the Fock basis instead.
pub fn photon_number_distribution(state: &StateModel, n_max: usize) -> Result<Vec<f64>> {
    match state {
        StateModel::Mixture(m) => Ok((0..=n_max).map(|n| m.fock_probability(n)).collect()),
        StateModel::Displaced(_) => Err(Error::Unsupported(
            "photon-number distribution of a displaced-thermal state".into(),
        )),
    }
}

/// Photon-number variance over mean.
pub fn fano_factor(state: &StateModel) -> Result<f64> {
    let (mean, second) = match state {
        StateModel::Mixture(m) => (m.mean(), m.second_moment()),
        StateModel::Displaced(d) => {
            let (mu, m) = (d.coherent_mean, d.thermal_mean);
            let mean = mu + m;
            let variance = m * m + m + mu * (2.0 * m + 1.0);
            (mean, variance + mean * mean)
        }
    };
    if mean <= 0.0 {
        return domain("Fano factor is undefined for zero mean photon number");
    }
    Ok((second - mean * mean) / mean)
}

/// `W(q, 0)` on the given grid.
pub fn wigner_slice(state: &SignedThermalMixture, q_grid: &[f64]) -> Vec<f64> {
    q_grid
        .iter()
        .map(|&q| wigner_radial(state, q.abs()))
        .collect()
}

/// Wigner function at phase-space radius `r`; the states here are
/// rotationally symmetric.
pub fn wigner_radial(state: &SignedThermalMixture, r: f64) -> f64 {
    let r2 = DoubleDouble::from(r) * r;
    let total: DoubleDouble = state
        .precise
        .iter()
        .map(|c| {
            let width = c.mean * 2.0 + 1.0;
            c.weight * (-(r2 / width)).exp() / width
        })
        .sum();
    total.to_f64() / PI
}
