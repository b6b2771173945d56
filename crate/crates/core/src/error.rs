use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown atomic level {0}")]
    UnknownLevel(String),

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("integration failed at t = {last_good_time:e} s: {reason}")]
    Integration { last_good_time: f64, reason: String },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("comparison failed: {0}")]
    Comparison(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status used by the command line front end.
    ///
    /// 1 covers everything the user can fix in the inputs, 2 numerical
    /// failures, 3 a failed golden comparison.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Integration { .. }
            | Error::NoConvergence(_)
            | Error::Fit(_)
            | Error::InsufficientData(_) => 2,
            Error::Comparison(_) => 3,
            _ => 1,
        }
    }
}
