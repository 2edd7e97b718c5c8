//! `qillum`: CSV datasets for multiplexed-click quantum illumination.

mod commands;
mod config;
mod error;
mod output;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Grid, HeraldOutcome, HeraldSpec, Probe, RunConfig, TrajectoryRun};
use crate::error::{CliError, Result};
use crate::output::emit;

#[derive(Debug, Parser)]
#[command(version, about = "Quantum illumination with multiplexed click detectors")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for trajectory ensembles.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for trajectory ensembles.
    #[arg(long, global = true, env = "QILLUM_THREADS")]
    threads: Option<usize>,

    /// Closed-form tolerance for `verify`.
    #[arg(long, global = true)]
    tolerance: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Herald probabilities and conditioned means over the TMSV mean.
    HeraldStats(HeraldStatsArgs),
    /// Receiver single-click probabilities with and without the target.
    ClickProb(ClickProbArgs),
    /// Thermal means matched to coherent single-click probabilities.
    Match(MatchArgs),
    /// Ensemble-mean posterior trajectories with a JSON metadata sidecar.
    Trajectories(TrajectoriesArgs),
    /// Wigner function slices of heralded states.
    Wigner(WignerArgs),
    /// Compare closed forms with the Fock-basis oracle.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct HeraldStatsArgs {
    /// Mean photon grid START:STOP:COUNT.
    #[arg(long)]
    grid: Option<Grid>,
    #[arg(long)]
    efficiency: Option<f64>,
    /// Herald outcome N:k (repeatable).
    #[arg(long = "outcome")]
    outcomes: Vec<HeraldOutcome>,
}

#[derive(Debug, Args)]
struct ClickProbArgs {
    /// Mean photon grid START:STOP:COUNT.
    #[arg(long)]
    grid: Option<Grid>,
    #[arg(long)]
    reflectivity: Option<f64>,
    #[arg(long)]
    background_mean: Option<f64>,
    #[arg(long)]
    herald_efficiency: Option<f64>,
    #[arg(long)]
    receiver_efficiency: Option<f64>,
    /// Probe `coherent` or `herald:N:k` (repeatable).
    #[arg(long = "probe")]
    probes: Vec<Probe>,
}

#[derive(Debug, Args)]
struct MatchArgs {
    /// Coherent mean grid START:STOP:COUNT.
    #[arg(long)]
    grid: Option<Grid>,
    #[arg(long)]
    eavesdropper_efficiency: Option<f64>,
}

#[derive(Debug, Args)]
struct TrajectoriesArgs {
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Simulate the target-absent hypothesis.
    #[arg(long)]
    target_absent: bool,
    /// Ensemble `coherent`, `quantum:N` or `matched:N` (repeatable).
    #[arg(long = "run")]
    runs: Vec<TrajectoryRun>,
}

#[derive(Debug, Args)]
struct WignerArgs {
    /// Position grid START:STOP:COUNT.
    #[arg(long)]
    grid: Option<Grid>,
    /// Heralded state n:eta:N:k (repeatable).
    #[arg(long = "state")]
    states: Vec<HeraldSpec>,
    /// Add oracle columns.
    #[arg(long)]
    oracle: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Fock truncation for every oracle state.
    #[arg(long)]
    n_max: Option<usize>,
    /// Offset added to every closed-form value (sensitivity check).
    #[arg(long)]
    perturbation: Option<f64>,
}

fn replace<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn replace_list<T>(slot: &mut Vec<T>, values: Vec<T>) {
    if !values.is_empty() {
        *slot = values;
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let out = cli.out.or(cfg.out.take());
    let out = out.as_deref();
    if cli.threads == Some(0) {
        return Err(CliError::config("--threads must be at least 1"));
    }
    match cli.command {
        Command::HeraldStats(args) => {
            let c = &mut cfg.herald_stats;
            replace(&mut c.grid, args.grid);
            replace(&mut c.efficiency, args.efficiency);
            replace_list(&mut c.outcomes, args.outcomes);
            c.validate()?;
            emit(out, &commands::herald_stats(c)?)
        }
        Command::ClickProb(args) => {
            let c = &mut cfg.click_prob;
            replace(&mut c.grid, args.grid);
            replace(&mut c.reflectivity, args.reflectivity);
            replace(&mut c.background_mean, args.background_mean);
            replace(&mut c.herald_efficiency, args.herald_efficiency);
            replace(&mut c.receiver_efficiency, args.receiver_efficiency);
            replace_list(&mut c.probes, args.probes);
            c.validate()?;
            emit(out, &commands::click_prob(c)?)
        }
        Command::Match(args) => {
            let c = &mut cfg.matching;
            replace(&mut c.grid, args.grid);
            replace(&mut c.eavesdropper_efficiency, args.eavesdropper_efficiency);
            c.validate()?;
            emit(out, &commands::matching(c)?)
        }
        Command::Trajectories(args) => {
            let c = &mut cfg.trajectories;
            replace(&mut c.shots, args.shots);
            replace(&mut c.trials, args.trials);
            replace(&mut c.seed, cli.seed);
            if args.target_absent {
                c.target_present = false;
            }
            replace_list(&mut c.runs, args.runs);
            c.validate()?;
            let (csv, metadata) = commands::trajectories(c, cli.threads)?;
            let meta = serde_json::to_string_pretty(&metadata).expect("metadata serializes") + "\n";
            emit(out, &csv)?;
            match out {
                Some(path) => emit(Some(&sidecar_path(path)), &meta),
                None => {
                    eprint!("{meta}");
                    Ok(())
                }
            }
        }
        Command::Wigner(args) => {
            let c = &mut cfg.wigner;
            replace(&mut c.grid, args.grid);
            replace_list(&mut c.states, args.states);
            c.oracle |= args.oracle;
            c.validate()?;
            emit(out, &commands::wigner(c)?)
        }
        Command::Verify(args) => {
            let c = &mut cfg.verify;
            replace(&mut c.tolerance, cli.tolerance);
            if args.n_max.is_some() {
                c.n_max = args.n_max;
            }
            replace(&mut c.perturbation, args.perturbation);
            c.validate()?;
            let report = verify::run(c);
            emit(out, &report.text)?;
            if report.passed {
                Ok(())
            } else {
                Err(CliError::Verification("closed forms disagree with the oracle".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qillum: {e}");
            e.exit_code()
        }
    }
}
