//! Closed forms against the truncated Fock-basis oracle.
//!
//! Each group of comparisons reports its count and worst deviation. A
//! truncation too small for the oracle fails the group with the reason.

use std::fmt::Write as _;

use qillum::channel::{apply_channel, receiver_click_prob, TargetChannel};
use qillum::oracle::{
    coherent_fock, oracle_beamsplitter, oracle_click_prob, oracle_herald_state, oracle_wigner, thermal_fock,
    DEFAULT_TRACE_TOLERANCE,
};
use qillum::povm::{click_probability, ClickMultiplex};
use qillum::states::{herald_state, photon_number_distribution, wigner_radial, StateModel};

use crate::commands::oracle_n_max;
use crate::config::VerifyConfig;

const MEANS: [f64; 4] = [0.1, 1.0, 2.0, 5.0];
const EFFICIENCIES: [f64; 3] = [0.5, 0.9, 1.0];
const REFLECTIVITIES: [f64; 3] = [0.1, 0.3, 0.8];
const BACKGROUNDS: [f64; 3] = [0.0, 3.0, 10.0];
const RECEIVER_EFFICIENCY: f64 = 0.9;

struct Group {
    name: &'static str,
    tolerance: f64,
    count: usize,
    worst: f64,
    worst_at: String,
}

impl Group {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            count: 0,
            worst: 0.0,
            worst_at: String::new(),
        }
    }

    fn compare(&mut self, closed: f64, oracle: f64, at: impl FnOnce() -> String) {
        self.count += 1;
        let diff = (closed - oracle).abs();
        if !(diff <= self.worst) {
            self.worst = diff;
            self.worst_at = at();
        }
    }

    fn passed(&self) -> bool {
        self.worst < self.tolerance
    }
}

pub struct Report {
    pub text: String,
    pub passed: bool,
}

/// Runs every comparison group; a group that cannot run fails with its reason.
pub fn run(cfg: &VerifyConfig) -> Report {
    let n_max = |mean: f64| cfg.n_max.unwrap_or_else(|| oracle_n_max(mean));
    let bump = cfg.perturbation;
    let groups: [(&str, f64, GroupFn); 4] = [
        ("click probabilities", cfg.tolerance, click_group),
        ("heralded states", cfg.tolerance, herald_group),
        ("channel output", cfg.tolerance, channel_group),
        ("end-to-end receiver", cfg.end_to_end_tolerance, end_to_end_group),
    ];
    let mut text = String::new();
    let mut passed = true;
    for (name, tolerance, f) in groups {
        let mut group = Group::new(name, tolerance);
        match f(&mut group, &n_max, bump) {
            Ok(()) => {
                let verdict = if group.passed() { "PASS" } else { "FAIL" };
                passed &= group.passed();
                let _ = writeln!(
                    text,
                    "{verdict} {}: {} comparisons, max deviation {:e} (tolerance {:e}){}",
                    group.name,
                    group.count,
                    group.worst,
                    group.tolerance,
                    if group.passed() { String::new() } else { format!(" at {}", group.worst_at) }
                );
            }
            Err(e) => {
                passed = false;
                let _ = writeln!(text, "FAIL {}: {e}", group.name);
            }
        }
    }
    Report { text, passed }
}

type GroupFn = fn(&mut Group, &dyn Fn(f64) -> usize, f64) -> qillum::Result<()>;

fn click_group(g: &mut Group, n_max: &dyn Fn(f64) -> usize, bump: f64) -> qillum::Result<()> {
    for n in MEANS {
        let thermal = thermal_fock(n, n_max(n), DEFAULT_TRACE_TOLERANCE)?;
        let coherent = coherent_fock(n, n_max(n), DEFAULT_TRACE_TOLERANCE)?;
        for eta in EFFICIENCIES {
            for d in 1..=4 {
                let mux = ClickMultiplex::new(d, eta)?;
                for k in 0..=d {
                    let at = || format!("n={n} eta={eta} N={d} k={k}");
                    let closed = click_probability(&mux, k, &StateModel::thermal(n)?)? + bump;
                    g.compare(closed, oracle_click_prob(d, k, eta, &thermal)?, at);
                    let closed = click_probability(&mux, k, &StateModel::coherent(n)?)? + bump;
                    g.compare(closed, oracle_click_prob(d, k, eta, &coherent)?, at);
                }
            }
        }
    }
    Ok(())
}

fn herald_group(g: &mut Group, n_max: &dyn Fn(f64) -> usize, bump: f64) -> qillum::Result<()> {
    let qs: Vec<f64> = (0..=30).map(|i| 0.1 * i as f64).collect();
    for n in MEANS {
        for eta in EFFICIENCIES {
            for d in 1..=4 {
                for k in 0..=d {
                    let at = || format!("n={n} eta={eta} N={d} k={k}");
                    let closed = herald_state(n, eta, d, k)?;
                    let oracle = oracle_herald_state(n, eta, d, k, n_max(n))?;
                    g.compare(closed.herald_probability + bump, oracle.herald_probability, at);
                    let dist = photon_number_distribution(&closed.state_model(), oracle.state.n_max())?;
                    for (a, b) in dist.iter().zip(oracle.state.probabilities()) {
                        g.compare(a + bump, *b, at);
                    }
                    for &q in &qs {
                        g.compare(wigner_radial(&closed.state, q) + bump, oracle_wigner(&oracle.state, q), at);
                    }
                }
            }
        }
    }
    Ok(())
}

fn channel_group(g: &mut Group, n_max: &dyn Fn(f64) -> usize, bump: f64) -> qillum::Result<()> {
    for kappa in REFLECTIVITIES {
        for nb in BACKGROUNDS {
            let channel = TargetChannel::new(kappa, nb)?;
            for n in MEANS {
                let cutoff = n_max(n + nb);
                for d in 1..=2 {
                    for k in 0..=d {
                        let at = || format!("kappa={kappa} nB={nb} n={n} N={d} k={k}");
                        let closed = apply_channel(&channel, &herald_state(n, 0.9, d, k)?.state_model());
                        let oracle = oracle_herald_state(n, 0.9, d, k, cutoff)?;
                        let returned = oracle_beamsplitter(&oracle.state, kappa, nb, cutoff)?;
                        let dist = photon_number_distribution(&closed, cutoff)?;
                        for (a, b) in dist.iter().zip(returned.probabilities()) {
                            g.compare(a + bump, *b, at);
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn end_to_end_group(g: &mut Group, n_max: &dyn Fn(f64) -> usize, bump: f64) -> qillum::Result<()> {
    for kappa in REFLECTIVITIES {
        for nb in BACKGROUNDS {
            let channel = TargetChannel::new(kappa, nb)?;
            for n in [0.1, 1.0, 2.0] {
                let cutoff = n_max(n + nb);
                let coherent = coherent_fock(n, cutoff, DEFAULT_TRACE_TOLERANCE)?;
                let coherent_return = oracle_beamsplitter(&coherent, kappa, nb, cutoff)?;
                let coherent_closed = apply_channel(&channel, &StateModel::coherent(n)?);
                for eta in EFFICIENCIES {
                    for d in 1..=3 {
                        for k in 0..=d {
                            let closed = apply_channel(&channel, &herald_state(n, eta, d, k)?.state_model());
                            let oracle = oracle_herald_state(n, eta, d, k, cutoff)?;
                            let returned = oracle_beamsplitter(&oracle.state, kappa, nb, cutoff)?;
                            for rx_detectors in 1..=2 {
                                let rx = ClickMultiplex::new(rx_detectors, RECEIVER_EFFICIENCY)?;
                                for ks in 0..=rx_detectors {
                                    let at = || {
                                        format!("kappa={kappa} nB={nb} n={n} eta={eta} N={d} k={k} N_S={rx_detectors} k_S={ks}")
                                    };
                                    g.compare(
                                        receiver_click_prob(&rx, ks, &closed)? + bump,
                                        oracle_click_prob(rx_detectors, ks, RECEIVER_EFFICIENCY, &returned)?,
                                        at,
                                    );
                                }
                            }
                        }
                    }
                }
                for rx_detectors in 1..=2 {
                    let rx = ClickMultiplex::new(rx_detectors, RECEIVER_EFFICIENCY)?;
                    for ks in 0..=rx_detectors {
                        g.compare(
                            receiver_click_prob(&rx, ks, &coherent_closed)? + bump,
                            oracle_click_prob(rx_detectors, ks, RECEIVER_EFFICIENCY, &coherent_return)?,
                            || format!("coherent kappa={kappa} nB={nb} n={n} N_S={rx_detectors} k_S={ks}"),
                        );
                    }
                }
            }
        }
    }
    Ok(())
}
