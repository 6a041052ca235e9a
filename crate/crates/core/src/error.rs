use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("laminar profile integral requires h >= 1, got h = {h}")]
    Domain { h: f64 },

    #[error("degenerate mobility: h = {h} <= 1 leaves the drag term undefined")]
    DegenerateMobility { h: f64 },

    #[error("film touches the fibre at node {node} (h = {h})")]
    Degenerate { node: usize, h: f64 },

    #[error("entropy potential diverges towards h = 1: h = {h} is below the floor {floor}")]
    BelowPotentialFloor { h: f64, floor: f64 },

    #[error("singular matrix: zero pivot in column {pivot}")]
    Singular { pivot: usize },

    #[error("Newton iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NewtonFailed { residual: f64, iterations: usize },

    #[error("travelling-wave Newton did not converge: residual {residual:e} after {iterations} iterations")]
    TravellingWaveFailed {
        residual: f64,
        iterations: usize,
        /// Last iterate.
        best: Box<crate::travelling::TravellingWave>,
    },

    #[error("closed-form speed is undefined: determinant {delta:e} is numerically zero")]
    DegenerateDeterminant { delta: f64 },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
