use thiserror::Error;

/// Errors raised by every module of the crate.
///
/// Each variant maps to a stable machine-readable code (see [`Error::code`]) so the
/// experiment driver can surface distinct failure classes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("modulus mismatch or unsupported modulus: {0}")]
    Modulus(String),

    #[error("entry {value} out of range [0, {modulus})")]
    EntryOutOfRange { value: i64, modulus: u32 },

    #[error("matrix is not of full row rank (rank {rank}, rows {rows})")]
    NotFullRank { rank: usize, rows: usize },

    #[error("amplitude table is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("size cap exceeded: {what} needs {needed} entries, cap is {cap}")]
    CapExceeded {
        what: String,
        needed: u128,
        cap: usize,
    },

    #[error("empty target set")]
    EmptyTarget,

    #[error("duplicate element in explicit target set")]
    DuplicateElement,

    #[error("fiber for syndrome {0:?} is empty (w_y = 0)")]
    EmptyFiber(Vec<u32>),

    #[error("register {0} not found in layout")]
    RegisterNotFound(usize),

    #[error("conditioning on an outcome of probability {0}")]
    ZeroProbability(f64),

    #[error("vector is not a unit vector (norm {0})")]
    NotUnit(f64),

    #[error("map is not a bijection on basis states")]
    NotBijective,

    #[error("tape length {got}, expected {expected}")]
    TapeLength { got: usize, expected: usize },

    #[error("invalid solution: {0}")]
    InvalidSolution(String),

    #[error("solution is outside the solver image (a reachable branch aborts)")]
    NotReachable,

    #[error("randomness-recovery precheck failed: {0}")]
    RecoveryFailed(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// Stable short code used in reports and process exit handling.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "E_DIMENSION",
            Error::Modulus(_) => "E_MODULUS",
            Error::EntryOutOfRange { .. } => "E_ENTRY_RANGE",
            Error::NotFullRank { .. } => "E_NOT_FULL_RANK",
            Error::NotNormalized(_) => "E_NOT_NORMALIZED",
            Error::CapExceeded { .. } => "E_CAP",
            Error::EmptyTarget => "E_EMPTY_TARGET",
            Error::DuplicateElement => "E_DUPLICATE",
            Error::EmptyFiber(_) => "E_EMPTY_FIBER",
            Error::RegisterNotFound(_) => "E_REGISTER",
            Error::ZeroProbability(_) => "E_ZERO_PROBABILITY",
            Error::NotUnit(_) => "E_NOT_UNIT",
            Error::NotBijective => "E_NOT_BIJECTIVE",
            Error::TapeLength { .. } => "E_TAPE_LENGTH",
            Error::InvalidSolution(_) => "E_INVALID_SOLUTION",
            Error::NotReachable => "E_NOT_REACHABLE",
            Error::RecoveryFailed(_) => "E_PRECHECK",
            Error::OutOfRange(_) => "E_RANGE",
            Error::Malformed(_) => "E_MALFORMED",
            Error::Invariant(_) => "E_INVARIANT",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
