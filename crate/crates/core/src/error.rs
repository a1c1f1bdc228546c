use thiserror::Error;

/// Errors raised by the model, filter, observer and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("mass matrix lower block is singular (det = {det:e})")]
    SingularMass { det: f64 },

    #[error("coupling case violated: k23*k32 = {product:e} must be below k22*k33 = {diagonal:e}")]
    CaseViolation { product: f64, diagonal: f64 },

    #[error("stability condition violated: lambda_min(gamma)*sigma = {value} must exceed 1/2")]
    WeakGains { value: f64 },

    #[error("covariance factorization failed after {attempts} jitter attempts")]
    Factorization { attempts: usize },

    #[error("innovation covariance is singular")]
    SingularInnovation,

    #[error("observer discretization unstable: gamma*sigma*dt = {product:.4} on channel {channel} (must stay below 2)")]
    UnstableDiscretization { channel: usize, product: f64 },

    #[error("numerical divergence at step {step} (t = {time:.3} s): {what}")]
    Divergence { step: usize, time: f64, what: String },

    #[error("relative error undefined: disturbance channel {channel} is identically zero")]
    ZeroDisturbance { channel: usize },

    #[error("seed mismatch: {0}")]
    SeedMismatch(String),

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical recurrence itself (as opposed to bad input).
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. } | Error::UnstableDiscretization { .. }
        )
    }

    /// Process exit status: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            e if e.is_divergence() => 2,
            Error::Factorization { .. } | Error::SingularInnovation => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
