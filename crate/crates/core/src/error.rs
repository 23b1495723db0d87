use std::path::PathBuf;

/// Errors raised by grid construction, solvers and study orchestration.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension {0}: {1}")]
    InvalidDimension(usize, &'static str),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("unresolved hole: radius {radius} is below the grid spacing {h}")]
    UnresolvedHole { radius: f64, h: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("iteration limit reached after {iterations} iterations (last residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("instability detected at step {step}: {detail}")]
    Instability { step: usize, detail: String },

    #[error("degenerate solution: {0}")]
    Degenerate(String),

    #[error("monotonicity violated at iteration {iteration}, node {node}: increase {excess:e}")]
    Monotonicity { iteration: usize, node: usize, excess: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("positivity lost at step {step}: min value {min:e}")]
    PositivityLoss { step: usize, min: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("resample error: {0}")]
    Resample(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("study failed: {0}")]
    StudyFailed(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Whether the error stems from invalid input rather than a solver failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidDimension(..)
                | Error::Geometry(_)
                | Error::Alignment(_)
                | Error::UnresolvedHole { .. }
                | Error::Config(_)
                | Error::Regime(_)
                | Error::Io { .. }
                | Error::Serde(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
