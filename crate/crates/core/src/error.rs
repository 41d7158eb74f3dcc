use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("inconsistent basis: {0}")]
    InconsistentBasis(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("unsupported degree {0}: exact representation counts are only available for quadratic fields")]
    UnsupportedDegree(usize),

    #[error("unsupported field: {0}")]
    UnsupportedField(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("|m| = {m} exceeds the configured bound {bound}")]
    BoundExceeded { m: u128, bound: u128 },

    #[error("enumeration bound exceeded for {p}^{m} ({points} points); use rho_lifted or a coarser modulus")]
    EnumerationBound { p: u64, m: u32, points: u128 },

    #[error("lifting violated at p = {p}, A = {a}: levels {m} and {m_next} disagree")]
    LiftingViolated { p: u64, a: i128, m: u32, m_next: u32 },

    #[error("local factor at p = {p} did not stabilise by level {m_max}")]
    NotStabilized { p: u64, m_max: u32 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("congruence precondition failed: {0}")]
    Congruence(String),

    #[error("degree overflow: {got} exceeds the configured maximum {max}")]
    DegreeOverflow { got: u32, max: u32 },

    #[error("empty polytope")]
    EmptyPolytope,

    #[error("unbounded domain box: {0}")]
    UnboundedDomain(String),

    #[error("local obstruction: {0}")]
    LocalObstruction(String),

    #[error("search exhausted up to T = {0}")]
    SearchExhausted(u64),

    #[error("residue {0} is not unexceptional")]
    NotUnexceptional(u64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
