use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input parameter lies outside the domain accepted by the operation.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("color content {content:?} does not sum to {n_sites} sites")]
    ContentMismatch { content: Vec<usize>, n_sites: usize },

    #[error("size cap exceeded: {0}")]
    CapExceeded(String),

    #[error("ground-state degeneracy {found} exceeds cap {cap}")]
    DegeneracyCap { found: usize, cap: usize },

    #[error("degenerate ground state (multiplicity {0}); no unique state to analyse")]
    DegenerateGround(usize),

    #[error("vanishing spectral gap ({0:e})")]
    VanishingGap(f64),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    /// An analytic prediction disagrees with a numerical check.
    #[error("verification failed: {0}")]
    Verification(String),
}

impl Error {
    /// True for errors caused by invalid user input rather than numerics.
    pub fn is_parameter_error(&self) -> bool {
        matches!(
            self,
            Error::ParameterDomain(_)
                | Error::DimensionMismatch(_)
                | Error::ContentMismatch { .. }
                | Error::CapExceeded(_)
        )
    }
}
