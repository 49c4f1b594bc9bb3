//! Crate-wide error type.

use thiserror::Error;

/// Alias for results produced by this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared across the solver layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A state or coefficient contained NaN or an infinity.
    #[error("non-finite value in {context}")]
    NonFinite {
        /// Where the value was encountered.
        context: String,
    },

    /// Construction parameters violate a structural requirement.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A precondition of the called operation does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Backward propagation requested outside an invertible subspace.
    #[error("backward propagation requires restriction to an invertible subspace (t = {t}, tau = {tau})")]
    BackwardNotInvertible {
        /// Requested target time.
        t: f64,
        /// Initial time.
        tau: f64,
    },

    /// A trajectory left the guard ball of the integrator.
    #[error("trajectory norm {norm:.3e} exceeded the blow-up ceiling {ceiling:.3e} at t = {t}")]
    BlowUp {
        /// Time at which the ceiling was crossed.
        t: f64,
        /// Norm at that time.
        norm: f64,
        /// Configured ceiling.
        ceiling: f64,
    },

    /// Singular values at the requested rank cut are too close to separate.
    #[error("degenerate spectral gap: singular value ratio {ratio:.3e} at rank {rank} is below {required:.3e}")]
    DegenerateGap {
        /// Measured ratio across the cut.
        ratio: f64,
        /// Rank at which the cut was requested.
        rank: usize,
        /// Minimum acceptable ratio.
        required: f64,
    },

    /// The spectral-gap condition for graph construction fails.
    #[error("gap condition failed: (gamma - rho)/ell = {ratio:.6} is not above the threshold {threshold:.6}")]
    GapCondition {
        /// Measured gap-to-Lipschitz ratio.
        ratio: f64,
        /// Required threshold.
        threshold: f64,
    },

    /// A fixed-point iteration stopped contracting.
    #[error("contraction failure after {iterations} iterations: measured factor {measured:.4} (bound {bound:.4})")]
    ContractionFailure {
        /// Iterations completed before the failure was declared.
        iterations: usize,
        /// Worst measured ratio of successive increments.
        measured: f64,
        /// A-priori contraction bound the run was certified against.
        bound: f64,
    },

    /// A pullback family did not settle below its Cauchy tolerance.
    #[error("pullback did not converge: residual {residual:.3e} after depth {depth:.3e}")]
    PullbackNotConverged {
        /// Last Cauchy residual between successive depths.
        residual: f64,
        /// Deepest start time used.
        depth: f64,
    },

    /// Two certificates cannot be nested (rank or ordering violation).
    #[error("structural mismatch: {0}")]
    Structural(String),

    /// Text deserialization failed.
    #[error("parse error at line {line}: {message}")]
    Parse {
        /// 1-based line number in the input.
        line: usize,
        /// What went wrong.
        message: String,
    },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand for [`Error::NonFinite`].
    pub fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }

    /// Shorthand for [`Error::InvalidArgument`].
    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    /// Shorthand for [`Error::Precondition`].
    pub fn precondition(message: impl Into<String>) -> Self {
        Error::Precondition(message.into())
    }
}
