use thiserror::Error;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mesh has no triangles")]
    EmptyMesh,

    #[error("operation requires a flat screen in the plane z = 0")]
    NonFlatMesh,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("lag-0 factorization failed at step {step}: {reason}")]
    Factorization { step: usize, reason: String },

    #[error("iterative solve did not converge at step {step} ({iterations} iterations, residual {residual:.3e})")]
    NotConverged {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("memory estimate {estimate_bytes} bytes exceeds budget {budget_bytes} bytes")]
    MemoryBudget {
        estimate_bytes: u64,
        budget_bytes: u64,
    },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("point {0} lies on the screen")]
    PointOnSurface(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::EmptyMesh
                | Error::NonFlatMesh
                | Error::DimensionMismatch(_)
                | Error::PointOnSurface(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
