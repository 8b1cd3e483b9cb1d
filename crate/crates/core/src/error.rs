use thiserror::Error;

pub type Result<T, E = SrbmError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SrbmError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("{what} is singular or ill-conditioned (condition number {cond:.3e})")]
    Singular { what: String, cond: f64 },

    #[error(
        "dimension {n} exceeds the enumeration limit {limit}: \
         the test visits all 2^n - 1 principal submatrices"
    )]
    TooLarge { n: usize, limit: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("LCP solver did not terminate after {pivots} pivots (q = {q:?})")]
    LcpCapExceeded { pivots: usize, q: Vec<f64> },

    #[error("LCP ray termination: no complementary solution found (q = {q:?})")]
    LcpRay { q: Vec<f64> },

    #[error("replication {replication}, step {step}: {source} (state z = {z:?})")]
    Step {
        replication: u64,
        step: u64,
        z: Vec<f64>,
        #[source]
        source: Box<SrbmError>,
    },

    #[error("theta grid lacks required points: {0:?}")]
    MissingGrid(Vec<Vec<f64>>),
}
