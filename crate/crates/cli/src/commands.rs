//! Dataset generators behind each subcommand. Each returns the CSV text.

use qillum::channel::{apply_channel, background_state, receiver_click_prob, TargetChannel};
use qillum::matching::{coherent_click_prob, matched_mean, thermal_click_prob, MatchSpec};
use qillum::mc::{average_trajectories, average_trajectories_with_threads, ThresholdCrossing, GENERATOR_FAMILY, STREAM_DERIVATION};
use qillum::oracle::{oracle_herald_state, oracle_wigner};
use qillum::povm::{click_probability, ClickMultiplex};
use qillum::states::{herald_state, mean_photon, wigner_slice, HeraldedState, StateModel};
use serde::Serialize;

use crate::config::{
    single_receiver, ClickProbConfig, HeraldStatsConfig, MatchConfig, Probe, TrajectoriesConfig, WignerConfig,
};
use crate::error::Result;
use crate::output::Csv;

/// Oracle truncation keeping thermal tails far below 1e-9.
pub fn oracle_n_max(mean: f64) -> usize {
    if mean <= 5.0 {
        200
    } else {
        600
    }
}

/// Heralded state, or `None` when the outcome has zero probability.
fn try_herald(n: f64, eta: f64, detectors: u32, clicks: u32) -> Result<Option<HeraldedState>> {
    match herald_state(n, eta, detectors, clicks) {
        Ok(h) => Ok(Some(h)),
        Err(qillum::Error::DegenerateHeralding { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Herald probabilities and conditioned means over the unconditioned mean.
pub fn herald_stats(cfg: &HeraldStatsConfig) -> Result<String> {
    let mut header = vec!["n".to_string()];
    for o in &cfg.outcomes {
        header.push(format!("pr_{}_{}", o.detectors, o.clicks));
        header.push(format!("mean_{}_{}", o.detectors, o.clicks));
    }
    let mut csv = Csv::new(&header);
    for n in cfg.grid.points() {
        let mut row = vec![n];
        for o in &cfg.outcomes {
            let mux = ClickMultiplex::new(o.detectors, cfg.efficiency)?;
            row.push(click_probability(&mux, o.clicks, &StateModel::thermal(n)?)?);
            let herald = try_herald(n, cfg.efficiency, o.detectors, o.clicks)?;
            row.push(herald.map_or(f64::NAN, |h| mean_photon(&h.state_model())));
        }
        csv.row(&row);
    }
    Ok(csv.into_string())
}

/// Single-detector receiver click probability under both hypotheses.
pub fn click_prob(cfg: &ClickProbConfig) -> Result<String> {
    let channel = TargetChannel::new(cfg.reflectivity, cfg.background_mean)?;
    let rx = single_receiver(cfg.receiver_efficiency)?;
    let h0 = receiver_click_prob(&rx, 1, &background_state(&channel))?;
    let mut header = vec!["n".to_string(), "h0".to_string()];
    header.extend(cfg.probes.iter().map(|p| format!("h1_{}", p.label())));
    let mut csv = Csv::new(&header);
    for n in cfg.grid.points() {
        let mut row = vec![n, h0];
        for probe in &cfg.probes {
            let signal = match probe {
                Probe::Coherent => Some(StateModel::coherent(n)?),
                Probe::Herald(o) => {
                    try_herald(n, cfg.herald_efficiency, o.detectors, o.clicks)?.map(|h| h.state_model())
                }
            };
            row.push(match signal {
                Some(s) => receiver_click_prob(&rx, 1, &apply_channel(&channel, &s))?,
                None => f64::NAN,
            });
        }
        csv.row(&row);
    }
    Ok(csv.into_string())
}

/// Matched thermal means with the identity residual as a check column.
pub fn matching(cfg: &MatchConfig) -> Result<String> {
    let eta = cfg.eavesdropper_efficiency;
    let mut csv = Csv::new(&["coherent_mean", "matched_mean", "coherent_click", "thermal_click", "residual"]);
    for alpha in cfg.grid.points() {
        let m = matched_mean(&MatchSpec::new(alpha, eta)?);
        let coherent = coherent_click_prob(alpha, eta);
        let thermal = thermal_click_prob(m, eta);
        csv.row(&[alpha, m, coherent, thermal, thermal - coherent]);
    }
    Ok(csv.into_string())
}

/// Wigner slices along the real axis.
pub fn wigner(cfg: &WignerConfig) -> Result<String> {
    let qs = cfg.grid.points();
    let mut header = vec!["q".to_string()];
    let mut columns = Vec::new();
    for spec in &cfg.states {
        let (n, eta, o) = (spec.mean_photons, spec.efficiency, spec.outcome);
        let state = herald_state(n, eta, o.detectors, o.clicks)?.state;
        header.push(spec.label());
        columns.push(wigner_slice(&state, &qs));
        if cfg.oracle {
            let oracle = oracle_herald_state(n, eta, o.detectors, o.clicks, oracle_n_max(n))?;
            header.push(format!("{}_oracle", spec.label()));
            columns.push(qs.iter().map(|&q| oracle_wigner(&oracle.state, q)).collect());
        }
    }
    let mut csv = Csv::new(&header);
    for (i, &q) in qs.iter().enumerate() {
        let mut row = vec![q];
        row.extend(columns.iter().map(|c| c[i]));
        csv.row(&row);
    }
    Ok(csv.into_string())
}

#[derive(Debug, Serialize)]
pub struct TrajectoryMetadata {
    pub generator: &'static str,
    pub stream_derivation: &'static str,
    pub seed: u64,
    pub trials: usize,
    pub shots: usize,
    pub target_present: bool,
    pub runs: Vec<RunMetadata>,
}

#[derive(Debug, Serialize)]
pub struct RunMetadata {
    pub label: String,
    pub signal_kind: qillum::mc::SignalKind,
    pub herald_detectors: u32,
    pub final_mean_posterior: f64,
    pub crossings: Vec<ThresholdCrossing>,
}

/// Ensemble-mean posterior curves, one column per run, plus metadata.
pub fn trajectories(cfg: &TrajectoriesConfig, threads: Option<usize>) -> Result<(String, TrajectoryMetadata)> {
    let mut curves = Vec::with_capacity(cfg.runs.len());
    let mut runs = Vec::with_capacity(cfg.runs.len());
    for run in &cfg.runs {
        let config = cfg.run_config(run);
        let result = match threads {
            Some(t) => average_trajectories_with_threads(&config, t)?,
            None => average_trajectories(&config)?,
        };
        runs.push(RunMetadata {
            label: run.label(),
            signal_kind: run.signal_kind,
            herald_detectors: run.herald_detectors,
            final_mean_posterior: *result.mean_posterior.last().expect("at least one shot"),
            crossings: result.crossings,
        });
        curves.push(result.mean_posterior);
    }
    let mut header = vec!["shot_index".to_string()];
    header.extend(runs.iter().map(|r| r.label.clone()));
    let mut csv = Csv::new(&header);
    for shot in 0..cfg.shots {
        let row: Vec<f64> = curves.iter().map(|c| c[shot]).collect();
        csv.indexed_row(shot + 1, &row);
    }
    let metadata = TrajectoryMetadata {
        generator: GENERATOR_FAMILY,
        stream_derivation: STREAM_DERIVATION,
        seed: cfg.seed,
        trials: cfg.trials,
        shots: cfg.shots,
        target_present: cfg.target_present,
        runs,
    };
    Ok((csv.into_string(), metadata))
}
