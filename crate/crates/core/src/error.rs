use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index set is not downward closed: {0} is missing a predecessor")]
    NotDownwardClosed(String),

    #[error("duplicate multi-index {0} in index set")]
    DuplicateIndex(String),

    #[error("malformed multi-index text on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("Hermite degree {degree} exceeds the evaluator limit {max}")]
    DegreeOverflow { degree: usize, max: usize },

    #[error("multi-index uses variable {position} but only {available} values were supplied")]
    SupportOutOfRange { position: usize, available: usize },

    #[error("Schauder function index {0} is outside 1..={1}")]
    BasisIndexOutOfRange(usize, usize),

    #[error("evaluation point {0} is outside [0, 1]")]
    PointOutOfRange(f64),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("finite element functions live on different meshes")]
    MeshMismatch,

    #[error("stiffness matrix is not positive definite at row {0}")]
    NotPositiveDefinite(usize),

    #[error("no samples supplied")]
    EmptySamples,

    #[error("Cholesky factorisation failed on a conditioned Gram matrix (||G - I|| = {0})")]
    CholeskyFailed(f64),

    #[error("reference estimator is not conditioned (||G - I|| = {0}); rerun with another seed")]
    UnconditionedReference(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed estimator file: {0}")]
    Format(String),

    #[error("trial n = {n}, repetition {repetition}: {source}")]
    Trial {
        n: usize,
        repetition: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
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
