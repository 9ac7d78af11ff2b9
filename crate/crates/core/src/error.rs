use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel evaluates to a non-finite value at u = {at}")]
    NonFiniteKernel { at: f64 },

    #[error("kernel derivative vanishes identically on a nonzero kernel; the deconvolution estimator would be identically zero")]
    DegenerateDerivative,

    #[error("kernel order {requested} is unsupported (maximum {max})")]
    UnsupportedOrder { requested: usize, max: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("bandwidth h = {h} is too large: h * A = {} exceeds the noise half-width a = {a} (need h <= a/A)", h * support)]
    BandwidthTooLarge { h: f64, a: f64, support: f64 },

    #[error("empty bandwidth range: need ceil(log n) <= D <= floor(delta * n^(1/3)), got [{lo}, {hi}]")]
    EmptyBandwidthRange { lo: i64, hi: i64 },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("curves are sampled on different grids")]
    GridMismatch,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable identifier, for machine-readable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidKernel(_) | Error::NonFiniteKernel { .. } => "kernel",
            Error::DegenerateDerivative => "degenerate-kernel",
            Error::UnsupportedOrder { .. } => "kernel-order",
            Error::InvalidParameter { .. } => "invalid-parameter",
            Error::BandwidthTooLarge { .. } => "bandwidth",
            Error::EmptyBandwidthRange { .. } => "empty-grid",
            Error::InvalidDensity(_) => "density",
            Error::GridMismatch => "grid-mismatch",
            Error::EmptyInput(_) => "empty-input",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
