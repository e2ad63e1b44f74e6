use std::path::PathBuf;

use multiout::DesignError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{source_name}:{line}: {reason}")]
    Syntax {
        source_name: String,
        line: usize,
        reason: String,
    },

    /// A configuration value is missing, malformed or out of range.
    #[error("invalid `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Design(#[from] DesignError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status: 2 validation, 3 infeasible design, 4 numeric failure, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Syntax { .. } | CliError::Config { .. } => 2,
            CliError::Design(e) => match e {
                DesignError::NoFeasibleDesign { .. } => 3,
                DesignError::Bracket { .. } => 4,
                DesignError::Invalid { .. }
                | DesignError::NotPositiveSemidefinite { .. }
                | DesignError::IndexOutOfRange { .. }
                | DesignError::DimensionMismatch { .. } => 2,
            },
            CliError::Io { .. } | CliError::Csv { .. } => 1,
        }
    }
}
