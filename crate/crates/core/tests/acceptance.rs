//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. The
//! process fails if any criterion's outcome differs from `EXPECTED_FAILURES`,
//! so a regression and an unexpected pass both surface.

use std::process::ExitCode;
use std::time::Instant;

use qillum::channel::{apply_channel, receiver_click_prob, TargetChannel};
use qillum::matching::{coherent_click_prob, matched_mean, thermal_click_prob, MatchSpec};
use qillum::mc::{average_trajectories, SignalKind, TrajectoryConfig, TrajectoryResult};
use qillum::oracle::{
    coherent_fock, oracle_beamsplitter, oracle_click_prob, oracle_herald_state, oracle_wigner, thermal_fock,
    DEFAULT_TRACE_TOLERANCE,
};
use qillum::povm::{click_distribution, click_probability, poisson_limit_reference, povm_fock_diagonal, ClickMultiplex};
use qillum::states::{
    fano_factor, herald_state, mean_photon, photon_number_distribution, wigner_radial, wigner_slice, DisplacedThermal,
    StateModel,
};

/// Criteria that are evaluated as stated but cannot hold under the model.
/// 1: the all-click and one-of-two herald probabilities meet where
///    `eta * n = 4.731`, i.e. at n = 4.980 for eta = 0.95.
/// 6: target-absent ensemble means at 3e4 shots stay above 0.05 for the
///    single-detector and coherent probes.
/// 7: the two-click herald of two detectors has a positive Wigner value at
///    the origin; its negativity sits on a ring near |q| = 1.
const EXPECTED_FAILURES: [usize; 3] = [1, 6, 7];

/// Ensemble size for the trajectory criteria.
const TRIALS: usize = 12_000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn within_relative(value: f64, target: f64, tolerance: f64) -> bool {
    ((value - target) / target).abs() <= tolerance
}

fn herald_probability(detectors: u32, clicks: u32, eta: f64, n: f64) -> f64 {
    let mux = ClickMultiplex::new(detectors, eta).unwrap();
    click_probability(&mux, clicks, &StateModel::thermal(n).unwrap()).unwrap()
}

fn criterion_crossover() -> Outcome {
    let gap = |n: f64| herald_probability(4, 4, 0.95, n) - herald_probability(2, 1, 0.95, n);
    let (mut lo, mut hi) = (1.0, 20.0);
    if gap(lo).signum() == gap(hi).signum() {
        return check(false, "no sign change of Pr(4 of 4) - Pr(1 of 2) on [1, 20]");
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if gap(mid).signum() == gap(lo).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    check((root - 5.4).abs() <= 0.1, format!("crossover at n = {root:.4} (target 5.4 +- 0.1)"))
}

fn criterion_mean_boost() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [0.01, 0.1, 1.0, 10.0] {
        let h = herald_state(n, 1.0, 1, 1).unwrap();
        worst = worst.max((mean_photon(&h.state_model()) - n - 1.0).abs());
    }
    check(worst < 1e-12, format!("max |boost - 1| = {worst:.2e}"))
}

fn criterion_matching() -> Outcome {
    let value = matched_mean(&MatchSpec::new(1.0, 0.9).unwrap());
    let mut residual: f64 = 0.0;
    for eta in [0.3, 0.9, 1.0] {
        for i in 0..=50 {
            let alpha = 0.1 * i as f64;
            let m = matched_mean(&MatchSpec::new(alpha, eta).unwrap());
            residual = residual.max((thermal_click_prob(m, eta) - coherent_click_prob(alpha, eta)).abs());
        }
    }
    check(
        (value - 1.62).abs() <= 0.005 && residual < 1e-12,
        format!("matched mean {value:.6} (target 1.62 +- 0.005), identity residual {residual:.2e}"),
    )
}

struct Runs {
    present: Vec<(String, TrajectoryResult)>,
    absent: Vec<(String, TrajectoryResult)>,
}

impl Runs {
    fn present(&self, label: &str) -> &TrajectoryResult {
        &self.present.iter().find(|(l, _)| l == label).unwrap().1
    }
}

fn run_all() -> Runs {
    let kinds = [
        ("quantum N=1", SignalKind::QuantumHeralded, 1),
        ("quantum N=2", SignalKind::QuantumHeralded, 2),
        ("quantum N=4", SignalKind::QuantumHeralded, 4),
        ("coherent", SignalKind::Coherent, 1),
        ("matched N=1", SignalKind::QuantumHeraldedMatched, 1),
        ("matched N=4", SignalKind::QuantumHeraldedMatched, 4),
    ];
    let run = |kind, detectors, present| {
        let mut config = TrajectoryConfig::benchmark(kind, detectors, present);
        config.trials = TRIALS;
        average_trajectories(&config).unwrap()
    };
    Runs {
        present: kinds.iter().map(|&(l, k, d)| (l.to_string(), run(k, d, true))).collect(),
        absent: kinds.iter().map(|&(l, k, d)| (l.to_string(), run(k, d, false))).collect(),
    }
}

fn crossing(result: &TrajectoryResult, threshold: f64) -> Option<usize> {
    result.crossing(threshold).and_then(|c| c.ensemble_shot)
}

fn criterion_shot_counts(runs: &Runs) -> Outcome {
    let targets = [
        ("quantum N=1", 0.8, 11_166.0),
        ("coherent", 0.8, 21_386.0),
        ("quantum N=1", 0.9, 21_045.0),
        ("quantum N=2", 0.9, 18_092.0),
        ("quantum N=4", 0.9, 15_689.0),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (label, threshold, target) in targets {
        match crossing(runs.present(label), threshold) {
            Some(shot) => {
                let ok = within_relative(shot as f64, target, 0.05);
                passed &= ok;
                parts.push(format!("{label} @{threshold}: {shot} vs {target}"));
            }
            None => {
                passed = false;
                parts.push(format!("{label} @{threshold}: never crossed"));
            }
        }
    }
    check(passed, parts.join("; "))
}

fn criterion_matched_speedup(runs: &Runs) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (matched, plain) in [("matched N=1", "quantum N=1"), ("matched N=4", "quantum N=4")] {
        for threshold in [0.8, 0.9] {
            match (crossing(runs.present(matched), threshold), crossing(runs.present(plain), threshold)) {
                (Some(m), Some(p)) => {
                    let ratio = m as f64 / p as f64;
                    passed &= (ratio - 0.5).abs() <= 0.1;
                    parts.push(format!("{matched}/{plain} @{threshold}: {ratio:.3}"));
                }
                _ => {
                    passed = false;
                    parts.push(format!("{matched}/{plain} @{threshold}: missing crossing"));
                }
            }
        }
    }
    check(passed, parts.join("; "))
}

fn criterion_absent(runs: &Runs) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (label, result) in &runs.absent {
        let last = *result.mean_posterior.last().unwrap();
        passed &= last < 0.05;
        parts.push(format!("{label}: {last:.4}"));
    }
    check(passed, format!("final Pr(H1) with target absent (< 0.05): {}", parts.join(", ")))
}

fn sample_states() -> Vec<StateModel> {
    let mut states = vec![StateModel::vacuum()];
    for n in [0.1, 1.0, 5.0] {
        states.push(StateModel::thermal(n).unwrap());
        states.push(StateModel::coherent(n).unwrap());
        states.push(StateModel::from(DisplacedThermal::new(n, 0.5).unwrap()));
        states.push(herald_state(n, 0.9, 2, 2).unwrap().state_model());
    }
    states
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() < tol
}

fn property_suites() -> Vec<(&'static str, bool)> {
    let mut out = Vec::new();

    let mut ok = true;
    for state in sample_states() {
        for d in 1..=8 {
            for eta in [0.0, 0.3, 0.9, 1.0] {
                let total: f64 = click_distribution(&ClickMultiplex::new(d, eta).unwrap(), &state).unwrap().iter().sum();
                ok &= close(total, 1.0, 1e-12);
            }
        }
    }
    out.push(("POVM completeness to 1e-12", ok));

    let mut ok = true;
    for n in [0.1, 1.0, 5.0] {
        for d in 1..=6 {
            for k in 0..=d {
                let p = photon_number_distribution(&herald_state(n, 0.9, d, k).unwrap().state_model(), k as usize).unwrap();
                ok &= p.iter().take(k as usize).all(|pn| pn.abs() < 1e-12);
                let diag = povm_fock_diagonal(d, k, 0.9, 40).unwrap();
                ok &= diag.iter().take(k as usize).all(|&c| c == 0.0);
            }
        }
    }
    out.push(("Fock support p(n < k) = 0", ok));

    let mut ok = true;
    for n in [0.0, 0.5, 2.0, 5.0] {
        for eta in [0.1, 0.5, 1.0] {
            let mux = ClickMultiplex::new(10_000, eta).unwrap();
            for state in [StateModel::thermal(n).unwrap(), StateModel::coherent(n).unwrap()] {
                for k in 0..=4 {
                    let exact = click_probability(&mux, k, &state).unwrap();
                    ok &= close(exact, poisson_limit_reference(k, eta, &state).unwrap(), 1e-3);
                }
            }
        }
    }
    out.push(("Poisson limit at N = 1e4 to 1e-3", ok));

    let mut ok = true;
    for kappa in [0.1, 0.3, 0.8] {
        for nb in [0.0, 3.0, 10.0] {
            let channel = TargetChannel::new(kappa, nb).unwrap();
            for state in sample_states() {
                let expected = kappa * mean_photon(&state) + nb;
                ok &= close(mean_photon(&apply_channel(&channel, &state)), expected, 1e-12 * expected.max(1.0));
            }
        }
    }
    out.push(("channel mean conservation to 1e-12", ok));

    out.push(("oracle equivalence (1e-9 closed forms, 1e-8 end to end)", oracle_grids()));

    let w = wigner_slice(&herald_state(1.0, 0.9, 2, 2).unwrap().state, &[0.0])[0];
    out.push(("W(0,0) < 0 for herald (1, 0.9, 2, 2)", w < 0.0));

    let sub = fano_factor(&herald_state(0.1, 0.9, 2, 2).unwrap().state_model()).unwrap();
    let poissonian = fano_factor(&StateModel::from(DisplacedThermal::new(2.0, 0.0).unwrap())).unwrap();
    out.push(("Fano factor: F < 1 for herald (0.1, 0.9, 2, 2), F = 1 for coherent", sub < 1.0 && close(poissonian, 1.0, 1e-12)));

    out
}

fn oracle_grids() -> bool {
    let n_max = |mean: f64| if mean <= 5.0 { 200 } else { 600 };
    let mut ok = true;
    for n in [0.1, 1.0, 2.0, 5.0] {
        for eta in [0.5, 0.9, 1.0] {
            let fock = thermal_fock(n, n_max(n), DEFAULT_TRACE_TOLERANCE).unwrap();
            let coherent = coherent_fock(n, 60, DEFAULT_TRACE_TOLERANCE).unwrap();
            for d in 1..=4 {
                let mux = ClickMultiplex::new(d, eta).unwrap();
                for k in 0..=d {
                    ok &= close(
                        click_probability(&mux, k, &StateModel::thermal(n).unwrap()).unwrap(),
                        oracle_click_prob(d, k, eta, &fock).unwrap(),
                        1e-9,
                    );
                    ok &= close(
                        click_probability(&mux, k, &StateModel::coherent(n).unwrap()).unwrap(),
                        oracle_click_prob(d, k, eta, &coherent).unwrap(),
                        1e-9,
                    );
                    let closed = herald_state(n, eta, d, k).unwrap();
                    let oracle = oracle_herald_state(n, eta, d, k, n_max(n)).unwrap();
                    ok &= close(closed.herald_probability, oracle.herald_probability, 1e-9);
                    let dist = photon_number_distribution(&closed.state_model(), oracle.state.n_max()).unwrap();
                    ok &= dist.iter().zip(oracle.state.probabilities()).all(|(a, b)| close(*a, *b, 1e-9));
                    for q in [0.0, 0.5, 1.0, 2.0] {
                        ok &= close(wigner_radial(&closed.state, q), oracle_wigner(&oracle.state, q), 1e-9);
                    }
                }
            }
        }
    }
    for kappa in [0.1, 0.3, 0.8] {
        for nb in [0.0, 3.0, 10.0] {
            let channel = TargetChannel::new(kappa, nb).unwrap();
            for n in [0.1, 1.0, 2.0] {
                for d in 1..=3 {
                    for k in 0..=d {
                        let cutoff = n_max(n + nb);
                        let closed = apply_channel(&channel, &herald_state(n, 0.9, d, k).unwrap().state_model());
                        let oracle = oracle_herald_state(n, 0.9, d, k, cutoff).unwrap();
                        let returned = oracle_beamsplitter(&oracle.state, kappa, nb, cutoff).unwrap();
                        for rx in 1..=2 {
                            let receiver = ClickMultiplex::new(rx, 0.9).unwrap();
                            for ks in 0..=rx {
                                ok &= close(
                                    receiver_click_prob(&receiver, ks, &closed).unwrap(),
                                    oracle_click_prob(rx, ks, 0.9, &returned).unwrap(),
                                    1e-8,
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    ok
}

fn criterion_properties() -> Outcome {
    let suites = property_suites();
    let failed: Vec<&str> = suites.iter().filter(|(_, ok)| !ok).map(|(name, _)| *name).collect();
    if failed.is_empty() {
        check(true, format!("all {} suites hold", suites.len()))
    } else {
        check(false, format!("failing: {}", failed.join("; ")))
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut outcomes = vec![
        (1, "herald crossover", criterion_crossover()),
        (2, "mean boost identity", criterion_mean_boost()),
        (3, "matching value", criterion_matching()),
    ];
    let runs = run_all();
    outcomes.push((4, "trajectory shot counts", criterion_shot_counts(&runs)));
    outcomes.push((5, "matched speedup", criterion_matched_speedup(&runs)));
    outcomes.push((6, "target-absent consistency", criterion_absent(&runs)));
    outcomes.push((7, "property suites", criterion_properties()));

    let mut unexpected = Vec::new();
    for (id, name, outcome) in &outcomes {
        let verdict = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {id} ({name}): {}", outcome.detail);
        if outcome.passed == EXPECTED_FAILURES.contains(id) {
            unexpected.push(*id);
        }
    }
    println!("acceptance finished in {:.1} s", started.elapsed().as_secs_f64());
    if unexpected.is_empty() {
        println!("outcomes match the expected set (failing: {EXPECTED_FAILURES:?})");
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
