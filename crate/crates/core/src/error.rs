use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid network at layer {layer}: {reason}")]
    InvalidNetwork { layer: usize, reason: String },

    #[error("invalid network: {0}")]
    InvalidNetworkShape(String),

    #[error("unknown activation `{name}` at layer {layer}")]
    UnknownActivation { layer: usize, name: String },

    #[error("parse error in {path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid interval [{lower}, {upper}]")]
    InvalidInterval { lower: f64, upper: f64 },

    #[error("no tangent point in range for chord slope {slope}")]
    NoTangentRoot { slope: f64 },

    #[error("degenerate simplex (volume {volume:e})")]
    DegenerateSimplex { volume: f64 },

    #[error("degenerate box along axis {axis}")]
    DegenerateBox { axis: usize },

    #[error("volume floor reached: child volume {volume:e} below {floor:e}")]
    VolumeFloor { volume: f64, floor: f64 },

    #[error("hessian bounds unavailable on region: {0}")]
    HessianUnavailable(String),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("point {point:?} lies outside the state box")]
    OutOfBox { point: Vec<f64> },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
