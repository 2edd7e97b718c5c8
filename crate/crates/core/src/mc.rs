//! Sequential shot-by-shot Bayesian detection trajectories.
//!
//! Each shot optionally samples an idler herald outcome, then samples the
//! receiver click count from the state that physically reaches the receiver
//! (the return state if the target is present, background otherwise) and
//! updates the target-present posterior. Posteriors are carried as log-odds
//! so tens of thousands of multiplicative updates cannot underflow.
//!
//! Trials draw from independent xoshiro256++ streams keyed by
//! `(seed, trial_index)`. Ensemble averages are accumulated over a fixed
//! partition of trials in trial order, so results do not depend on the
//! number of worker threads.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, background_state, receiver_click_prob, TargetChannel};
use crate::error::{domain, Error, Result};
use crate::matching::{matched_mean, MatchSpec};
use crate::numeric::NeumaierSum;
use crate::povm::{click_distribution, ClickMultiplex, MAX_HERALD_DETECTORS};
use crate::states::{herald_state, tmsv_marginal, StateModel};

pub const GENERATOR_FAMILY: &str = "xoshiro256++";
pub const STREAM_DERIVATION: &str =
    "Xoshiro256PlusPlus::seed_from_u64(splitmix64(seed ^ splitmix64(trial_index + 0x9E3779B97F4A7C15)))";
/// Trials per work unit. Fixed so the summation order never changes.
const CHUNK_TRIALS: usize = 32;
/// Work units reduced per pass, bounding memory to `BATCH_CHUNKS * shots`.
const BATCH_CHUNKS: usize = 64;
/// Allowed deviation of a cumulative distribution's last entry from one.
const CDF_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    QuantumHeralded,
    Coherent,
    QuantumHeraldedMatched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    /// Unconditioned TMSV mean, or `|alpha|^2` for coherent and matched runs.
    pub mean_photons: f64,
    pub herald_efficiency: f64,
    pub herald_detectors: u32,
    pub receiver_efficiency: f64,
    pub receiver_detectors: u32,
    pub reflectivity: f64,
    pub background_mean: f64,
    pub shots: usize,
    pub trials: usize,
    pub seed: u64,
    pub signal_kind: SignalKind,
    pub target_present: bool,
    /// Only read for matched runs.
    pub eavesdropper_efficiency: f64,
    pub thresholds: Vec<f64>,
}

impl TrajectoryConfig {
    /// Low-reflectivity benchmark: `n = 1`, `kappa = 0.1`, `n_B = 3`,
    /// all efficiencies 0.9, single receiver detector, 3e4 shots.
    pub fn benchmark(signal_kind: SignalKind, herald_detectors: u32, target_present: bool) -> Self {
        Self {
            mean_photons: 1.0,
            herald_efficiency: 0.9,
            herald_detectors,
            receiver_efficiency: 0.9,
            receiver_detectors: 1,
            reflectivity: 0.1,
            background_mean: 3.0,
            shots: 30_000,
            trials: 3_000,
            seed: 0x5eed,
            signal_kind,
            target_present,
            eavesdropper_efficiency: 0.9,
            thresholds: vec![0.8, 0.9],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                domain(format!("{name} must lie in [0, 1], got {v}"))
            }
        };
        if !(self.mean_photons.is_finite() && self.mean_photons >= 0.0) {
            return domain(format!("mean_photons must be non-negative, got {}", self.mean_photons));
        }
        unit("herald_efficiency", self.herald_efficiency)?;
        unit("receiver_efficiency", self.receiver_efficiency)?;
        if self.herald_detectors == 0 || self.herald_detectors > MAX_HERALD_DETECTORS {
            return domain(format!(
                "herald_detectors must lie in [1, {MAX_HERALD_DETECTORS}], got {}",
                self.herald_detectors
            ));
        }
        ClickMultiplex::new(self.receiver_detectors, self.receiver_efficiency)?;
        TargetChannel::new(self.reflectivity, self.background_mean)?;
        if self.shots == 0 {
            return domain("shots must be at least 1");
        }
        if self.trials == 0 {
            return domain("trials must be at least 1");
        }
        if self.signal_kind == SignalKind::QuantumHeraldedMatched {
            MatchSpec::new(self.mean_photons, self.eavesdropper_efficiency)?;
        }
        for &t in &self.thresholds {
            if !(t > 0.0 && t < 1.0) {
                return domain(format!("thresholds must lie in (0, 1), got {t}"));
            }
        }
        Ok(())
    }
}

/// First shot (1-based) at which a curve reaches a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCrossing {
    pub threshold: f64,
    /// Measured on the ensemble-mean curve.
    pub ensemble_shot: Option<usize>,
    /// One entry per trial, in trial order.
    pub per_trial: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngMetadata {
    pub generator: String,
    pub stream_derivation: String,
    pub seed: u64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    /// Ensemble mean of `Pr(H1)` after each shot.
    pub mean_posterior: Vec<f64>,
    pub crossings: Vec<ThresholdCrossing>,
    pub rng_metadata: RngMetadata,
}

impl TrajectoryResult {
    pub fn crossing(&self, threshold: f64) -> Option<&ThresholdCrossing> {
        self.crossings.iter().find(|c| c.threshold == threshold)
    }
}

/// Cumulative click distribution with the last entry pinned to one.
/// Entries after the last outcome of nonzero probability are pinned too, so
/// inverse-transform sampling never selects an impossible outcome.
pub fn click_cdf(mux: &ClickMultiplex, state: &StateModel) -> Result<Vec<f64>> {
    cumulate(&click_distribution(mux, state)?)
}

fn cumulate(probabilities: &[f64]) -> Result<Vec<f64>> {
    let mut acc = NeumaierSum::new();
    let mut cdf: Vec<f64> = probabilities
        .iter()
        .map(|&p| {
            acc.add(p);
            acc.value()
        })
        .collect();
    let last = *cdf.last().expect("at least one outcome");
    if (last - 1.0).abs() > CDF_TOLERANCE {
        return Err(Error::NumericInstability {
            what: "click distribution does not sum to one".into(),
            excursion: last - 1.0,
        });
    }
    let support_end = probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    for c in &mut cdf[support_end..] {
        *c = 1.0;
    }
    Ok(cdf)
}

/// Smallest `k` with `cdf[k] >= r`.
pub fn sample_clicks(cdf: &[f64], r: f64) -> Result<u32> {
    if cdf.is_empty() {
        return domain("empty cumulative distribution");
    }
    if cdf.windows(2).any(|w| !(w[0] <= w[1])) || cdf[0] < 0.0 {
        return domain("cumulative distribution must be non-negative and nondecreasing");
    }
    if *cdf.last().unwrap() != 1.0 {
        return domain("cumulative distribution must end at exactly one");
    }
    if !(r > 0.0 && r < 1.0) {
        return domain(format!("uniform variate must lie in (0, 1), got {r}"));
    }
    Ok(invert(cdf, r))
}

#[inline]
fn invert(cdf: &[f64], r: f64) -> u32 {
    cdf.partition_point(|&c| c < r) as u32
}

/// Logistic map from log-odds to probability.
#[inline]
pub fn posterior_from_log_odds(log_odds: f64) -> f64 {
    if log_odds >= 0.0 {
        1.0 / (1.0 + (-log_odds).exp())
    } else {
        let e = log_odds.exp();
        e / (1.0 + e)
    }
}

/// Splitmix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for one trial.
pub fn trial_rng(seed: u64, trial_index: u64) -> Xoshiro256PlusPlus {
    let key = splitmix64(seed ^ splitmix64(trial_index.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    Xoshiro256PlusPlus::seed_from_u64(key)
}

/// Result of one simulated shot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotOutcome {
    /// Sampled idler clicks; always zero for coherent probes.
    pub herald_clicks: u32,
    pub receiver_clicks: u32,
    pub log_odds: f64,
}

impl ShotOutcome {
    /// `(Pr(H0), Pr(H1))` after the shot.
    pub fn prior_pair(&self) -> (f64, f64) {
        let p1 = posterior_from_log_odds(self.log_odds);
        (1.0 - p1, p1)
    }
}

/// Posterior sums per shot, then first crossings per threshold and trial.
type ChunkTotals = (Vec<f64>, Vec<Vec<Option<usize>>>);

/// Precomputed sampling distributions and likelihood tables for one config.
#[derive(Debug, Clone)]
pub struct TrajectoryModel {
    config: TrajectoryConfig,
    heralded: bool,
    herald_cdf: Vec<f64>,
    receiver_outcomes: usize,
    /// `Pr(k_S | H0)`.
    h0: Vec<f64>,
    h0_cdf: Vec<f64>,
    /// `Pr(k_S | H1, k)` flattened as `[k * receiver_outcomes + k_S]`.
    h1: Vec<f64>,
    h1_cdf: Vec<f64>,
    /// `ln(Pr(k_S | H1, k) / Pr(k_S | H0))`; NaN where both vanish.
    log_ratio: Vec<f64>,
}

impl TrajectoryModel {
    pub fn new(config: &TrajectoryConfig) -> Result<Self> {
        config.validate()?;
        let channel = TargetChannel::new(config.reflectivity, config.background_mean)?;
        let receiver = ClickMultiplex::new(config.receiver_detectors, config.receiver_efficiency)?;
        let receiver_outcomes = config.receiver_detectors as usize + 1;

        let (heralded, herald_cdf, signals): (bool, Vec<f64>, Vec<Option<StateModel>>) =
            match config.signal_kind {
                SignalKind::Coherent => (
                    false,
                    vec![1.0],
                    vec![Some(StateModel::coherent(config.mean_photons)?)],
                ),
                SignalKind::QuantumHeralded | SignalKind::QuantumHeraldedMatched => {
                    let tmsv_mean = match config.signal_kind {
                        SignalKind::QuantumHeraldedMatched => matched_mean(&MatchSpec::new(
                            config.mean_photons,
                            config.eavesdropper_efficiency,
                        )?),
                        _ => config.mean_photons,
                    };
                    let idler = ClickMultiplex::new(config.herald_detectors, config.herald_efficiency)?;
                    let herald_probs = click_distribution(&idler, &tmsv_marginal(tmsv_mean)?.into())?;
                    let signals = (0..=config.herald_detectors)
                        .map(|k| {
                            if herald_probs[k as usize] == 0.0 {
                                return Ok(None);
                            }
                            match herald_state(tmsv_mean, config.herald_efficiency, config.herald_detectors, k) {
                                Ok(h) => Ok(Some(h.state_model())),
                                Err(Error::DegenerateHeralding { .. }) => Ok(None),
                                Err(e) => Err(e),
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    (true, cumulate(&herald_probs)?, signals)
                }
            };

        let h0_state = background_state(&channel);
        let h0: Vec<f64> = (0..receiver_outcomes as u32)
            .map(|ks| receiver_click_prob(&receiver, ks, &h0_state))
            .collect::<Result<_>>()?;
        let h0_cdf = cumulate(&h0)?;

        let mut h1 = Vec::with_capacity(signals.len() * receiver_outcomes);
        let mut h1_cdf = Vec::with_capacity(signals.len() * receiver_outcomes);
        for signal in &signals {
            match signal {
                Some(s) => {
                    let returned = apply_channel(&channel, s);
                    let row: Vec<f64> = (0..receiver_outcomes as u32)
                        .map(|ks| receiver_click_prob(&receiver, ks, &returned))
                        .collect::<Result<_>>()?;
                    h1_cdf.extend(cumulate(&row)?);
                    h1.extend(row);
                }
                // Never sampled: the herald outcome has zero probability.
                None => {
                    h1.extend(std::iter::repeat_n(f64::NAN, receiver_outcomes));
                    h1_cdf.extend(std::iter::repeat_n(1.0, receiver_outcomes));
                }
            }
        }
        let log_ratio = h1
            .iter()
            .enumerate()
            .map(|(i, &l1)| {
                let l0 = h0[i % receiver_outcomes];
                if l0 == 0.0 && l1 == 0.0 || l1.is_nan() {
                    f64::NAN
                } else {
                    (l1 / l0).ln()
                }
            })
            .collect();

        Ok(Self {
            config: config.clone(),
            heralded,
            herald_cdf,
            receiver_outcomes,
            h0,
            h0_cdf,
            h1,
            h1_cdf,
            log_ratio,
        })
    }

    pub fn config(&self) -> &TrajectoryConfig {
        &self.config
    }

    /// Cumulative herald distribution; `[1.0]` for coherent probes.
    pub fn herald_cdf(&self) -> &[f64] {
        &self.herald_cdf
    }

    /// `Pr(k_S | H0)` as used in the shot loop.
    pub fn h0_likelihoods(&self) -> &[f64] {
        &self.h0
    }

    /// `Pr(k_S | H1)` for herald outcome `k` as used in the shot loop.
    pub fn h1_likelihoods(&self, herald_clicks: u32) -> &[f64] {
        let start = herald_clicks as usize * self.receiver_outcomes;
        &self.h1[start..start + self.receiver_outcomes]
    }

    /// One shot: sample the herald (quantum probes only, one draw), then the
    /// receiver clicks (one draw), then update the log-odds.
    pub fn run_shot<R: Rng + ?Sized>(&self, log_odds: f64, rng: &mut R) -> Result<ShotOutcome> {
        let k = if self.heralded {
            invert(&self.herald_cdf, rng.sample(Open01))
        } else {
            0
        };
        let row = k as usize * self.receiver_outcomes;
        let cdf = if self.config.target_present {
            &self.h1_cdf[row..row + self.receiver_outcomes]
        } else {
            &self.h0_cdf[..]
        };
        let ks = invert(cdf, rng.sample(Open01));
        let ratio = self.log_ratio[row + ks as usize];
        if ratio.is_nan() {
            return Err(Error::UndefinedPosterior);
        }
        Ok(ShotOutcome {
            herald_clicks: k,
            receiver_clicks: ks,
            log_odds: log_odds + ratio,
        })
    }

    /// Streams `(shot_index, Pr(H1))` for one trial, starting from even odds.
    fn simulate(&self, trial_index: u64, mut visit: impl FnMut(usize, f64)) -> Result<()> {
        let mut rng = trial_rng(self.config.seed, trial_index);
        let mut log_odds = 0.0;
        for shot in 0..self.config.shots {
            log_odds = self.run_shot(log_odds, &mut rng)?.log_odds;
            visit(shot, posterior_from_log_odds(log_odds));
        }
        Ok(())
    }

    /// `Pr(H1)` after each of the `M` shots of one trial.
    pub fn run_trajectory(&self, trial_index: u64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.config.shots);
        self.simulate(trial_index, |_, p| out.push(p))?;
        Ok(out)
    }

    /// Per-shot posterior sums and per-threshold crossings for a range of trials.
    fn run_chunk(&self, trials: std::ops::Range<usize>) -> Result<ChunkTotals> {
        let thresholds = &self.config.thresholds;
        let mut sums = vec![0.0; self.config.shots];
        let mut crossings = vec![Vec::with_capacity(trials.len()); thresholds.len()];
        for trial in trials {
            let mut first: Vec<Option<usize>> = vec![None; thresholds.len()];
            self.simulate(trial as u64, |shot, p| {
                sums[shot] += p;
                for (slot, &t) in first.iter_mut().zip(thresholds) {
                    if slot.is_none() && p >= t {
                        *slot = Some(shot + 1);
                    }
                }
            })?;
            for (list, f) in crossings.iter_mut().zip(first) {
                list.push(f);
            }
        }
        Ok((sums, crossings))
    }

    /// Ensemble over all trials on the current rayon pool.
    pub fn average(&self) -> Result<TrajectoryResult> {
        let cfg = &self.config;
        let chunks: Vec<std::ops::Range<usize>> = (0..cfg.trials)
            .step_by(CHUNK_TRIALS)
            .map(|start| start..(start + CHUNK_TRIALS).min(cfg.trials))
            .collect();
        let mut totals = vec![NeumaierSum::new(); cfg.shots];
        let mut per_trial: Vec<Vec<Option<usize>>> = vec![Vec::with_capacity(cfg.trials); cfg.thresholds.len()];
        for batch in chunks.chunks(BATCH_CHUNKS) {
            let results: Vec<_> = batch
                .par_iter()
                .map(|range| self.run_chunk(range.clone()))
                .collect::<Result<_>>()?;
            for (sums, crossings) in results {
                for (total, s) in totals.iter_mut().zip(sums) {
                    total.add(s);
                }
                for (list, c) in per_trial.iter_mut().zip(crossings) {
                    list.extend(c);
                }
            }
        }
        let mean_posterior: Vec<f64> = totals
            .iter()
            .map(|t| t.value() / cfg.trials as f64)
            .collect();
        let crossings = cfg
            .thresholds
            .iter()
            .zip(per_trial)
            .map(|(&threshold, per_trial)| ThresholdCrossing {
                threshold,
                ensemble_shot: first_crossing(&mean_posterior, threshold),
                per_trial,
            })
            .collect();
        Ok(TrajectoryResult {
            mean_posterior,
            crossings,
            rng_metadata: RngMetadata {
                generator: GENERATOR_FAMILY.into(),
                stream_derivation: STREAM_DERIVATION.into(),
                seed: cfg.seed,
                trials: cfg.trials,
            },
        })
    }
}

/// 1-based index of the first entry `>= threshold`.
pub fn first_crossing(curve: &[f64], threshold: f64) -> Option<usize> {
    curve.iter().position(|&p| p >= threshold).map(|i| i + 1)
}

pub fn run_trajectory(config: &TrajectoryConfig, trial_index: u64) -> Result<Vec<f64>> {
    TrajectoryModel::new(config)?.run_trajectory(trial_index)
}

/// Ensemble average on the global rayon pool.
pub fn average_trajectories(config: &TrajectoryConfig) -> Result<TrajectoryResult> {
    TrajectoryModel::new(config)?.average()
}

/// Ensemble average on a dedicated pool of `threads` workers.
pub fn average_trajectories_with_threads(config: &TrajectoryConfig, threads: usize) -> Result<TrajectoryResult> {
    let model = TrajectoryModel::new(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("cannot build worker pool: {e}")))?;
    pool.install(|| model.average())
}
