//! Library backing the `rdalloc` command-line tool: file formats and the
//! command implementations, kept separate from argument parsing so they can
//! be driven directly from tests.

pub mod commands;
pub mod io;

use thiserror::Error;

/// Exit codes: 0 success, 2 usage or parse error, 3 numerical failure
/// (non-convergence), 4 degenerate experimental design.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error("fit did not converge within the iteration cap (params written anyway)")]
    NotConverged,

    #[error(transparent)]
    Core(#[from] rdalloc_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::File { .. } | CliError::Usage(_) => 2,
            CliError::NotConverged => 3,
            CliError::Core(
                rdalloc_core::Error::DegenerateDesign { .. }
                | rdalloc_core::Error::TooFewSamples { .. },
            ) => 4,
            CliError::Core(_) => 2,
        }
    }
}
