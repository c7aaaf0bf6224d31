use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("support of {sites} sites exceeds the dense limit of {limit}")]
    SupportTooLarge { sites: usize, limit: usize },
    #[error("operator is a multiple of the identity and has empty support")]
    EmptySupport,
    #[error("operator support {support:?} is not contained in the window")]
    SupportOutsideWindow { support: Vec<i64> },
    #[error("window of {sites} sites exceeds the limit of {limit} for this method")]
    WindowTooLarge { sites: usize, limit: usize },
    #[error("periodic ring of {sites} sites exceeds the dense superoperator limit of {limit}")]
    RingTooLarge { sites: usize, limit: usize },
    #[error("RK4 local error {estimate:e} exceeds tolerance {tolerance:e}")]
    StepSizeRejected { estimate: f64, tolerance: f64 },
    #[error("interaction term is not Hermitian (anti-Hermitian part {residual:e})")]
    NotHermitian { residual: f64 },
    #[error("light-cone fit degenerate: {0}")]
    FitDegenerate(String),
    #[error("arity {n} exceeds the cap {cap}")]
    ArityTooLarge { n: usize, cap: usize },
    #[error("cumulant table is missing order {0}")]
    IncompleteTable(usize),
    #[error("wavenumbers differ: {0} vs {1}")]
    WavenumberMismatch(f64, f64),
    #[error("no conserved charges found")]
    NoChargesFound,
    #[error("Gram matrix rank deficient: rank {rank} of {dim}")]
    DegenerateGram { rank: usize, dim: usize },
    #[error("invalid model: {0}")]
    ModelInvalid(String),
    #[error("L*(s) is not a two-site discrete divergence (residual {0:e})")]
    DivergenceSplitFailed(f64),
    #[error("no local o solves the telescoping condition (residual {0:e})")]
    UnsolvableTelescope(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
