use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a constitutive law or formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid or physically inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("assembly error in element {element}: {reason}")]
    Assembly { element: usize, reason: String },

    /// Factorization or solve failure; `field` names the physics being solved.
    #[error("{field} solver failed: {reason}")]
    Solver { field: String, reason: String },

    /// The mechanical system became singular because the ligament is fully broken.
    #[error("specimen separated: {0}")]
    Separation(String),

    #[error("run aborted: {0}")]
    Aborted(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn solver(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Solver {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical solve (as opposed to bad input).
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::Solver { .. } | Error::Separation(_) | Error::Aborted(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
