use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("inconsistent bounds: lower {lower} exceeds upper {upper}")]
    InconsistentBounds { lower: f64, upper: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("monotonicity violation: fail point {fail} dominates safe point {safe}")]
    MonotonicityViolation { fail: usize, safe: usize },

    #[error("sampler stalled: {0}")]
    SamplerStalled(String),

    #[error("no convergence in {what} after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("singular design matrix (rank {rank} < {columns} columns)")]
    SingularDesign { rank: usize, columns: usize },

    #[error("validation responses have zero variance")]
    ZeroVariance,

    #[error("chain too short: {len} states, need at least {needed}")]
    InsufficientChain { len: usize, needed: usize },

    #[error("regions {first} and {second} overlap")]
    OverlappingRegions { first: usize, second: usize },

    #[error("regions do not cover the unit cube (covered volume {covered})")]
    IncompleteCover { covered: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
