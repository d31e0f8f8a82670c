use thiserror::Error;

use crate::graph::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid feature model: {}", join_violations(.0))]
    FeatureModel(Vec<Violation>),

    #[error("{0}")]
    Contract(String),

    #[error("budget k={k} is infeasible: only {available} non-rumor users")]
    InfeasibleBudget { k: usize, available: usize },

    #[error("instance too large for exact enumeration: r*m = {size} exceeds {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::FeatureModel(_)
                | Error::InfeasibleBudget { .. }
                | Error::Contract(_)
        )
    }
}
