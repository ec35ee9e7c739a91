use std::path::PathBuf;

/// Errors produced by the solver pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate element {element} (area {area:e})")]
    DegenerateElement { element: usize, area: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("singular matrix: pivot {pivot:e} at row {row}")]
    SingularMatrix { row: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mesh adaptation failed at step {step}: {reason}")]
    AdaptationFailure { step: usize, reason: String },

    #[error("point ({x}, {y}) lies outside the mesh")]
    InterpolationFailure { x: f64, y: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a time-step index to an adaptation failure.
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            Error::AdaptationFailure { reason, .. } => Error::AdaptationFailure { step, reason },
            other => other,
        }
    }
}
