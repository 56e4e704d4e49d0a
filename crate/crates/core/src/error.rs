use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// One violated parameter constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Every problem found while resolving a raw configuration, not just the first.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl ConfigError {
    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle) || v.field == needle)
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),

    /// The chemical solve did not reach its residual target. `peclet` is the
    /// largest |shear|·h on the grid, the usual culprit.
    #[error("chemical solver failed after {iterations} iterations (relative residual {residual:.3e}, A·h = {peclet:.3})")]
    SolverDiverged {
        iterations: usize,
        residual: f64,
        peclet: f64,
    },

    #[error("every one of {n_runs} trajectories timed out; increase t_max")]
    AllTimedOut { n_runs: usize },

    #[error("{0}")]
    Domain(String),

    #[error("need at least {needed} usable rows, found {found}")]
    InsufficientRows { needed: usize, found: usize },

    #[error("invalid sweep: {0}")]
    Sweep(String),

    #[error("malformed grid file: {0}")]
    GridFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
