use std::fmt;

use crate::hamiltonian::ParameterPoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Why the stable-conversion solver could not produce a dwell at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerFailure {
    /// The largest imaginary part is shared by several eigenvalues, so no
    /// dwell can raise the dominant proportion.
    DegenerateGap,
    /// The state has no overlap with the dominant eigenvector.
    DominantUnreachable,
}

impl fmt::Display for SchedulerFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulerFailure::DegenerateGap => {
                f.write_str("imaginary parts of the leading eigenvalues are degenerate")
            }
            SchedulerFailure::DominantUnreachable => {
                f.write_str("state has no component along the dominant eigenvector")
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate eigensystem{}: {reason}", at(.point))]
    Degeneracy {
        point: Option<ParameterPoint>,
        reason: String,
    },

    #[error("evolution step failed: {0}")]
    Step(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("scheduler failed at point {index}: {failure}")]
    Scheduler {
        index: usize,
        failure: SchedulerFailure,
    },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn at(point: &Option<ParameterPoint>) -> String {
    match point {
        Some(p) => format!(" at {p}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
