use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or malformed. `field` names the
    /// offending entry so front ends can report it verbatim.
    #[error("invalid `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("node {node} does not exist at t = {t}")]
    UnknownNode { node: usize, t: usize },

    #[error("all attachment weights are zero at t = {t}")]
    AllWeightsZero { t: usize },

    #[error("tail fit needs at least {needed} survival points in [{k_min}, {k_max}], found {found}")]
    InsufficientTail {
        needed: usize,
        found: usize,
        k_min: u64,
        k_max: u64,
    },

    #[error(
        "quadrature bracket too wide at {grid_points} grid points (half-gap {half_gap:e}); try {suggested_grid_points}"
    )]
    ResolutionInsufficient {
        grid_points: usize,
        half_gap: f64,
        suggested_grid_points: usize,
    },

    #[error("invariant violated at t = {t}: {message}")]
    InvariantViolation { t: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user input rather than by a failing run.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Json(_))
    }
}
