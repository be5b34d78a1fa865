use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance is not symmetric positive definite")]
    InvalidCovariance,

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("invalid sample set: {0}")]
    InvalidSample(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("too few samples for a mixture fit: {n} (need at least 2)")]
    TooFewSamples { n: usize },

    #[error("degenerate sample: zero weighted variance cannot be scaled to a nonzero target")]
    DegenerateSample,

    #[error("moment target is not attainable: {0}")]
    InfeasibleTarget(String),

    #[error("mass matrix is singular at nodes {0:?} (no particle overlaps them)")]
    UncorrectableNodes(Vec<usize>),

    #[error("charge correction too large: {count} of {total} particles would change weight by more than their own value")]
    CorrectionTooLarge { count: usize, total: usize },

    #[error("linear solve did not reach tolerance: relative residual {residual:e}")]
    SolverFailure { residual: f64 },

    #[error("particle {index} lies outside the domain: x = {x}")]
    InvalidParticle { index: usize, x: f64 },

    #[error("charge density is not neutral: total charge {total:e}")]
    NonNeutral { total: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Picard iteration did not converge in {iterations} iterations; residual trace {trace:?}")]
    StepFailure { iterations: usize, trace: Vec<f64> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("file truncated at byte offset {offset} (needed {needed} more bytes)")]
    Truncated { offset: usize, needed: usize },

    #[error("malformed data at byte offset {offset}: {reason}")]
    Malformed { offset: usize, reason: String },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
