use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric instability: {what} (excursion {excursion:e})")]
    NumericInstability { what: String, excursion: f64 },

    #[error("degenerate heralding: N={detectors}, k={clicks} has vanishing probability")]
    DegenerateHeralding { detectors: u32, clicks: u32 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("undefined posterior: both likelihoods vanish")]
    UndefinedPosterior,

    #[error("truncation insufficient: trace deficit {deficit:e} exceeds tolerance {tolerance:e}")]
    TruncationInsufficient { deficit: f64, tolerance: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
