use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate lattice")]
    DegenerateLattice,

    #[error("enumeration limit exceeded: {0}")]
    EnumerationLimit(String),

    #[error("window too large: about {estimate:.3e} points, budget is {budget}")]
    WindowTooLarge { estimate: f64, budget: usize },

    #[error("resolution too coarse: {0}")]
    ResolutionTooCoarse(String),

    #[error("certificate search exhausted at |q| <= {bound}")]
    CertificateSearchExhausted { bound: f64 },

    #[error("non-transverse section: segment {0} has its direction inside the plane")]
    NonTransverseSection(usize),

    #[error("transference witness not found")]
    TransferenceWitnessNotFound,

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for the errors that mean "the requested computation is too big".
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::EnumerationLimit(_)
                | Error::WindowTooLarge { .. }
                | Error::BudgetExceeded(_)
                | Error::CertificateSearchExhausted { .. }
        )
    }
}
