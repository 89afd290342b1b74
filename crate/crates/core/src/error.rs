use thiserror::Error;

/// Crate-wide error type.
///
/// Construction errors (`InvalidParameter`) are raised eagerly so that every
/// value of a domain type satisfies its invariants; runtime errors carry
/// enough state to diagnose a failed run (Newton residual history, the
/// offending time step, the uncovered cylinder).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("kernel evaluated on the diagonal x = y")]
    KernelDiagonal,

    #[error("time step {dt} exceeds the stable explicit limit {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("degenerate operator row: row sum + tail is zero at node {0}")]
    DegenerateRow(usize),

    #[error(
        "Newton did not converge after {iterations} iterations \
         (last residual {last:e}); residual history {history:?}"
    )]
    NewtonDiverged {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("singular linear system: zero pivot at column {0}")]
    SingularSystem(usize),

    #[error("insufficient coverage: {0}")]
    Coverage(String),

    #[error("analysis input: {0}")]
    Analysis(String),

    #[error("persistence: {0}")]
    Persist(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
