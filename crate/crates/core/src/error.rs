use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library reports. Variants are grouped by the stage that
/// raises them.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    // matrices and tolerances
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix dimension {0} outside the supported range 1..=64")]
    DimensionOutOfRange(usize),
    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid tolerance configuration: {0}")]
    InvalidTolerance(String),
    #[error("eigensolver did not converge for a {0}x{0} matrix")]
    NonConvergence(usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("matrix is singular at tolerance")]
    Singular,

    // product signatures
    #[error("invalid product signature: {0}")]
    InvalidSignature(String),
    #[error("exponents must satisfy 0 <= r < s, got r={r}, s={s}")]
    BadExponents { r: u32, s: u32 },

    // witness construction
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("canonical form not reached: {0}")]
    CanonicalFormNotReached(String),

    // idempotent analysis
    #[error("functional is not idempotent: <x,f> = {0}")]
    NotIdempotent(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    // reconstruction
    #[error("no generic probe found within budget of {0} queries")]
    InsufficientGenericity(usize),
    #[error("probe system is rank deficient: rank {rank} < {needed}")]
    SingularSystem { rank: usize, needed: usize },

    // preserver recovery
    #[error("probe frame is singular at tolerance")]
    SingularFrame,
    #[error("map does not preserve the spectral hypothesis: {0}")]
    NotPreserver(String),
    #[error("neither multiplicative nor anti-multiplicative after scaling")]
    AmbiguousForm,
    #[error("intertwiner null space has dimension {0}, expected 1")]
    NullSpaceDimension(usize),
    #[error("scalar {0} is not within tolerance of an m-th root of unity")]
    ScalarNotRootOfUnity(String),
    #[error("image of a rank-one idempotent is not a scaled rank-one idempotent: {0}")]
    NotRankOnePreserving(String),
    #[error("projective frame inconsistent: {0}")]
    FrameInconsistent(String),
    #[error("validation failed; best branch residual {residual:e}")]
    ValidationFailed { residual: f64 },
    #[error("image of a self-adjoint matrix is not self-adjoint")]
    NotSelfAdjointImage,

    // documents
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}
