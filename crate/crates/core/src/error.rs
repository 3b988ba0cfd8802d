use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error at `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("coefficient error at node {node}: {reason}")]
    Coefficient { node: usize, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("weight evaluation error: {0}")]
    Weight(String),

    #[error("linear solve failed at slice {slice}: {reason}")]
    Solver { slice: usize, reason: String },

    #[error("quasi-linear step blew up at slice {slice} (relative change {change:.3e})")]
    BlowUp { slice: usize, change: f64 },

    #[error("{what} did not converge after {iterations} iterations (last update {last:.3e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("conjugate gradient stagnated at residual {residual:.3e}; increase epsilon or lambda")]
    Conditioning { residual: f64, history: Vec<f64> },

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("budget violation: {0}")]
    Budget(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Validation { .. }
            | Error::Geometry(_)
            | Error::Coefficient { .. }
            | Error::Shape(_)
            | Error::Weight(_) => 2,
            Error::Solver { .. }
            | Error::BlowUp { .. }
            | Error::NonConvergence { .. }
            | Error::Conditioning { .. } => 3,
            Error::Oracle(_) | Error::Budget(_) => 4,
            Error::Io { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
