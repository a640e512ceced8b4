use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integer overflow computing {0}")]
    Overflow(&'static str),

    #[error("integrand is not finite at {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("integral underflowed to zero")]
    Underflow,

    #[error("empty or negligible survival set")]
    EmptySet,

    #[error("survival set volume too small for requested sample size ({proposals} proposals, {accepted} accepted)")]
    ProposalCap { proposals: u64, accepted: u64 },

    #[error("sampler envelope violated: log-density {value} exceeds bound {bound} at {point:?}")]
    EnvelopeViolated { point: Vec<f64>, value: f64, bound: f64 },

    #[error("coefficients outside the projection set: sup-norm {sup_norm} > {bound}")]
    OutsideFeasibleSet { sup_norm: f64, bound: f64 },

    #[error("support mismatch: q vanishes where p is positive at {point:?}")]
    SupportMismatch { point: Vec<f64> },

    #[error("densities are conditioned on different sets")]
    SetMismatch,

    #[error("derivative oracle required but not available for `{0}`")]
    MissingDerivatives(String),

    #[error("projection did not converge after {rounds} rounds (violation {violation:e}, {cuts} cuts)")]
    ProjectionDiverged { rounds: usize, violation: f64, cuts: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
