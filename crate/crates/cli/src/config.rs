//! Run configuration: one JSON document with a section per subcommand.
//!
//! Every section has defaults, so a config file only lists what it changes.
//! Unknown keys are rejected and physical ranges are checked before any
//! computation starts.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qillum::channel::TargetChannel;
use qillum::matching::MatchSpec;
use qillum::mc::{SignalKind, TrajectoryConfig};
use qillum::povm::{ClickMultiplex, MAX_HERALD_DETECTORS};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub out: Option<PathBuf>,
    pub herald_stats: HeraldStatsConfig,
    pub click_prob: ClickProbConfig,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
    pub trajectories: TrajectoriesConfig,
    pub wigner: WignerConfig,
    pub verify: VerifyConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

/// `count` evenly spaced points from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => {
                let step = (self.stop - self.start) / (n - 1) as f64;
                (0..n).map(|i| self.start + step * i as f64).collect()
            }
        }
    }

    fn validate_non_negative(&self, name: &str) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(CliError::config(format!("{name}: grid bounds must be finite")));
        }
        if self.count > 0 && self.start.min(self.stop) < 0.0 {
            return Err(CliError::config(format!("{name}: grid values must be non-negative")));
        }
        Ok(())
    }
}

impl FromStr for Grid {
    type Err = String;

    /// Parses `START:STOP:COUNT`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts.as_slice() else {
            return Err(format!("expected START:STOP:COUNT, got {s:?}"));
        };
        Ok(Self {
            start: start.parse().map_err(|e| format!("grid start: {e}"))?,
            stop: stop.parse().map_err(|e| format!("grid stop: {e}"))?,
            count: count.parse().map_err(|e| format!("grid count: {e}"))?,
        })
    }
}

fn split_fields<'a, const K: usize>(s: &'a str, what: &str) -> std::result::Result<[&'a str; K], String> {
    let parts: Vec<&str> = s.split(':').collect();
    parts
        .try_into()
        .map_err(|_| format!("{what}: expected {K} colon-separated fields, got {s:?}"))
}

fn parse_field<T: FromStr>(s: &str, what: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse().map_err(|e| format!("{what}: {e}"))
}

/// Herald outcome `k` clicks out of `N` detectors, written `N:k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct HeraldOutcome {
    pub detectors: u32,
    pub clicks: u32,
}

impl FromStr for HeraldOutcome {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let [d, k] = split_fields(s, "herald outcome")?;
        let outcome = Self {
            detectors: parse_field(d, "detector count")?,
            clicks: parse_field(k, "click count")?,
        };
        if outcome.detectors == 0 || outcome.detectors > MAX_HERALD_DETECTORS {
            return Err(format!("detector count must lie in [1, {MAX_HERALD_DETECTORS}], got {d}"));
        }
        if outcome.clicks > outcome.detectors {
            return Err(format!("click count {k} exceeds detector count {d}"));
        }
        Ok(outcome)
    }
}

impl TryFrom<String> for HeraldOutcome {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<HeraldOutcome> for String {
    fn from(o: HeraldOutcome) -> String {
        format!("{}:{}", o.detectors, o.clicks)
    }
}

/// A probe sent at the target: `coherent` or `herald:N:k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Probe {
    Coherent,
    Herald(HeraldOutcome),
}

impl Probe {
    pub fn label(&self) -> String {
        match self {
            Self::Coherent => "coherent".into(),
            Self::Herald(o) => format!("herald_{}_{}", o.detectors, o.clicks),
        }
    }
}

impl FromStr for Probe {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "coherent" {
            return Ok(Self::Coherent);
        }
        match s.strip_prefix("herald:") {
            Some(outcome) => outcome.parse().map(Self::Herald),
            None => Err(format!("expected `coherent` or `herald:N:k`, got {s:?}")),
        }
    }
}

impl TryFrom<String> for Probe {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<Probe> for String {
    fn from(p: Probe) -> String {
        match p {
            Probe::Coherent => "coherent".into(),
            Probe::Herald(o) => format!("herald:{}", String::from(o)),
        }
    }
}

/// Heralded state written `n:eta:N:k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct HeraldSpec {
    pub mean_photons: f64,
    pub efficiency: f64,
    pub outcome: HeraldOutcome,
}

impl HeraldSpec {
    pub fn label(&self) -> String {
        format!(
            "herald_{}_{}_{}_{}",
            self.mean_photons, self.efficiency, self.outcome.detectors, self.outcome.clicks
        )
    }
}

impl FromStr for HeraldSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let [n, eta, d, k] = split_fields(s, "herald state")?;
        let spec = Self {
            mean_photons: parse_field(n, "mean photons")?,
            efficiency: parse_field(eta, "efficiency")?,
            outcome: format!("{d}:{k}").parse()?,
        };
        if !(spec.mean_photons.is_finite() && spec.mean_photons >= 0.0) {
            return Err(format!("mean photons must be non-negative, got {n}"));
        }
        if !(0.0..=1.0).contains(&spec.efficiency) {
            return Err(format!("efficiency must lie in [0, 1], got {eta}"));
        }
        Ok(spec)
    }
}

impl TryFrom<String> for HeraldSpec {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<HeraldSpec> for String {
    fn from(h: HeraldSpec) -> String {
        format!(
            "{}:{}:{}",
            h.mean_photons,
            h.efficiency,
            String::from(h.outcome)
        )
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(CliError::config(format!("{name} must lie in [0, 1], got {v}")))
    }
}

fn outcome(detectors: u32, clicks: u32) -> HeraldOutcome {
    HeraldOutcome { detectors, clicks }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeraldStatsConfig {
    pub grid: Grid,
    pub efficiency: f64,
    pub outcomes: Vec<HeraldOutcome>,
}

impl Default for HeraldStatsConfig {
    fn default() -> Self {
        Self {
            grid: Grid {
                start: 0.1,
                stop: 10.0,
                count: 100,
            },
            efficiency: 0.95,
            outcomes: vec![outcome(1, 0), outcome(1, 1), outcome(2, 1), outcome(2, 2), outcome(4, 4)],
        }
    }
}

impl HeraldStatsConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate_non_negative("herald_stats.grid")?;
        check_unit("herald_stats.efficiency", self.efficiency)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClickProbConfig {
    pub grid: Grid,
    pub reflectivity: f64,
    pub background_mean: f64,
    pub herald_efficiency: f64,
    pub receiver_efficiency: f64,
    pub probes: Vec<Probe>,
}

impl Default for ClickProbConfig {
    fn default() -> Self {
        Self {
            grid: Grid {
                start: 0.1,
                stop: 20.0,
                count: 200,
            },
            reflectivity: 0.1,
            background_mean: 10.0,
            herald_efficiency: 0.9,
            receiver_efficiency: 0.9,
            probes: vec![
                Probe::Coherent,
                Probe::Herald(outcome(1, 1)),
                Probe::Herald(outcome(2, 2)),
                Probe::Herald(outcome(4, 4)),
            ],
        }
    }
}

impl ClickProbConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate_non_negative("click_prob.grid")?;
        TargetChannel::new(self.reflectivity, self.background_mean)
            .map_err(|e| CliError::config(format!("click_prob: {e}")))?;
        check_unit("click_prob.herald_efficiency", self.herald_efficiency)?;
        check_unit("click_prob.receiver_efficiency", self.receiver_efficiency)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchConfig {
    pub grid: Grid,
    pub eavesdropper_efficiency: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            grid: Grid {
                start: 0.0,
                stop: 5.0,
                count: 51,
            },
            eavesdropper_efficiency: 0.9,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate_non_negative("match.grid")?;
        MatchSpec::new(0.0, self.eavesdropper_efficiency)
            .map(|_| ())
            .map_err(|e| CliError::config(format!("match: {e}")))
    }
}

/// One ensemble in a trajectory run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRun {
    pub signal_kind: SignalKind,
    #[serde(default = "one")]
    pub herald_detectors: u32,
}

fn one() -> u32 {
    1
}

impl TrajectoryRun {
    pub fn label(&self) -> String {
        match self.signal_kind {
            SignalKind::Coherent => "coherent".into(),
            SignalKind::QuantumHeralded => format!("quantum_n{}", self.herald_detectors),
            SignalKind::QuantumHeraldedMatched => format!("matched_n{}", self.herald_detectors),
        }
    }
}

impl FromStr for TrajectoryRun {
    type Err = String;

    /// Parses `coherent`, `quantum:N` or `matched:N`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (kind, detectors) = s.split_once(':').unwrap_or((s, "1"));
        let signal_kind = match kind {
            "coherent" => SignalKind::Coherent,
            "quantum" => SignalKind::QuantumHeralded,
            "matched" => SignalKind::QuantumHeraldedMatched,
            other => return Err(format!("unknown signal kind {other:?}; use coherent, quantum or matched")),
        };
        Ok(Self {
            signal_kind,
            herald_detectors: parse_field(detectors, "herald detectors")?,
        })
    }
}

/// Shared benchmark parameters plus the list of ensembles to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoriesConfig {
    pub mean_photons: f64,
    pub herald_efficiency: f64,
    pub receiver_efficiency: f64,
    pub receiver_detectors: u32,
    pub reflectivity: f64,
    pub background_mean: f64,
    pub shots: usize,
    pub trials: usize,
    pub seed: u64,
    pub target_present: bool,
    pub eavesdropper_efficiency: f64,
    pub thresholds: Vec<f64>,
    pub runs: Vec<TrajectoryRun>,
}

impl Default for TrajectoriesConfig {
    fn default() -> Self {
        let base = TrajectoryConfig::benchmark(SignalKind::QuantumHeralded, 1, true);
        let run = |signal_kind, herald_detectors| TrajectoryRun {
            signal_kind,
            herald_detectors,
        };
        Self {
            mean_photons: base.mean_photons,
            herald_efficiency: base.herald_efficiency,
            receiver_efficiency: base.receiver_efficiency,
            receiver_detectors: base.receiver_detectors,
            reflectivity: base.reflectivity,
            background_mean: base.background_mean,
            shots: base.shots,
            trials: base.trials,
            seed: base.seed,
            target_present: base.target_present,
            eavesdropper_efficiency: base.eavesdropper_efficiency,
            thresholds: base.thresholds,
            runs: vec![
                run(SignalKind::QuantumHeralded, 1),
                run(SignalKind::QuantumHeralded, 2),
                run(SignalKind::QuantumHeralded, 4),
                run(SignalKind::Coherent, 1),
            ],
        }
    }
}

impl TrajectoriesConfig {
    pub fn run_config(&self, run: &TrajectoryRun) -> TrajectoryConfig {
        TrajectoryConfig {
            mean_photons: self.mean_photons,
            herald_efficiency: self.herald_efficiency,
            herald_detectors: run.herald_detectors,
            receiver_efficiency: self.receiver_efficiency,
            receiver_detectors: self.receiver_detectors,
            reflectivity: self.reflectivity,
            background_mean: self.background_mean,
            shots: self.shots,
            trials: self.trials,
            seed: self.seed,
            signal_kind: run.signal_kind,
            target_present: self.target_present,
            eavesdropper_efficiency: self.eavesdropper_efficiency,
            thresholds: self.thresholds.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs.is_empty() {
            return Err(CliError::config("trajectories.runs must list at least one ensemble"));
        }
        for run in &self.runs {
            self.run_config(run)
                .validate()
                .map_err(|e| CliError::config(format!("trajectories ({}): {e}", run.label())))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WignerConfig {
    pub grid: Grid,
    pub states: Vec<HeraldSpec>,
    /// Adds a Fock-basis oracle column next to each closed-form column.
    pub oracle: bool,
}

impl Default for WignerConfig {
    fn default() -> Self {
        let spec = |d, k| HeraldSpec {
            mean_photons: 1.0,
            efficiency: 0.9,
            outcome: outcome(d, k),
        };
        Self {
            grid: Grid {
                start: -4.0,
                stop: 4.0,
                count: 161,
            },
            states: vec![spec(2, 1), spec(2, 2), spec(10, 2)],
            oracle: false,
        }
    }
}

impl WignerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grid.start.is_finite() && self.grid.stop.is_finite()) {
            return Err(CliError::config("wigner.grid bounds must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Closed form against oracle, per comparison.
    pub tolerance: f64,
    /// Herald, channel and receiver composed.
    pub end_to_end_tolerance: f64,
    /// Overrides the mean-dependent truncation.
    pub n_max: Option<usize>,
    /// Added to every closed-form value before comparison.
    pub perturbation: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            end_to_end_tolerance: 1e-8,
            n_max: None,
            perturbation: 0.0,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tolerance", self.tolerance), ("end_to_end_tolerance", self.end_to_end_tolerance)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::config(format!("verify.{name} must be positive, got {v}")));
            }
        }
        if !self.perturbation.is_finite() {
            return Err(CliError::config("verify.perturbation must be finite"));
        }
        if self.n_max == Some(0) {
            return Err(CliError::config("verify.n_max must be at least 1"));
        }
        Ok(())
    }
}

/// Receiver with one detector at the given efficiency.
pub fn single_receiver(efficiency: f64) -> Result<ClickMultiplex> {
    ClickMultiplex::single(efficiency).map_err(|e| CliError::config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points() {
        let g: Grid = "0:1:5".parse().unwrap();
        assert_eq!(g.points(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!("0:1:0".parse::<Grid>().unwrap().points().is_empty());
        assert_eq!("2:9:1".parse::<Grid>().unwrap().points(), vec![2.0]);
        assert!("0:1".parse::<Grid>().is_err());
    }

    #[test]
    fn probe_round_trip() {
        let p: Probe = "herald:4:2".parse().unwrap();
        assert_eq!(p, Probe::Herald(outcome(4, 2)));
        assert_eq!(String::from(p), "herald:4:2");
        assert!("herald:2:3".parse::<Probe>().is_err());
        assert!("squeezed".parse::<Probe>().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"match": {"eavesdroper_efficiency": 0.9}}"#);
        assert!(err.is_err());
        let err = serde_json::from_str::<RunConfig>(r#"{"plot": true}"#);
        assert!(err.is_err());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"trajectories": {"trials": 10}}"#).unwrap();
        assert_eq!(cfg.trajectories.trials, 10);
        assert_eq!(cfg.trajectories.shots, 30_000);
        assert_eq!(cfg.trajectories.runs.len(), 4);
    }

    #[test]
    fn zero_reflectivity_is_a_config_error() {
        let cfg: RunConfig = serde_json::from_str(r#"{"click_prob": {"reflectivity": 0.0}}"#).unwrap();
        assert!(matches!(cfg.click_prob.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn trajectory_runs_parse() {
        let run: TrajectoryRun = "matched:4".parse().unwrap();
        assert_eq!(run.signal_kind, SignalKind::QuantumHeraldedMatched);
        assert_eq!(run.herald_detectors, 4);
        assert_eq!("coherent".parse::<TrajectoryRun>().unwrap().herald_detectors, 1);
        let json: TrajectoryRun = serde_json::from_str(r#"{"signal_kind": "quantum_heralded"}"#).unwrap();
        assert_eq!(json.label(), "quantum_n1");
    }
}
