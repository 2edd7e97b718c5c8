//! Quantum illumination with multiplexed click detectors.
//!
//! Heralded two-mode squeezed vacuum probes, coherent probes, a thermal
//! target channel, Bayesian detection trajectories and an independent
//! truncated-Fock oracle for cross-checking the closed forms.

mod error;
pub mod channel;
pub mod matching;
pub mod mc;
pub mod numeric;
pub mod oracle;
pub mod povm;
pub mod states;

pub use error::{Error, Result};
