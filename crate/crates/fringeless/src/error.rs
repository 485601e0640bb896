//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by configuration, synthesis, analysis, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter or plan invariant violation.
    #[error("configuration error: {0}")]
    Config(String),

    /// Trace file could not be parsed or fails its format contract.
    #[error("ingestion error{}: {msg}", row.map(|r| format!(" (row {r})")).unwrap_or_default())]
    Ingestion { row: Option<usize>, msg: String },

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input outside the physical regime in which the analysis is valid.
    #[error("regime error: {0}")]
    Regime(String),

    /// Trace does not originate from the plan it is analyzed against.
    #[error("provenance error: {0}")]
    Provenance(String),

    /// Trace too short for the requested resolution bandwidth.
    #[error("precision error: {0}")]
    Precision(String),

    /// Noise-floor offset collides with a modulation harmonic or Nyquist.
    #[error("placement error: {0}")]
    Placement(String),

    /// Demodulation low-pass cutoff leaks mixing products.
    #[error("leakage error: {0}")]
    Leakage(String),

    /// Degenerate abscissa in a fit.
    #[error("rank error: {0}")]
    Rank(String),

    /// Too few usable points survive exclusion rules.
    #[error("insufficiency error: {0}")]
    Insufficiency(String),

    /// Fitted response does not cross the detection threshold.
    #[error("no-sensitivity error: {0}")]
    NoSensitivity(String),

    #[error("pipeline error at voltage index {index}: {source}")]
    AtVoltageIndex {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attach the sweep voltage index at which a pipeline error occurred.
    pub fn at_voltage_index(self, index: usize) -> Self {
        Error::AtVoltageIndex {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
