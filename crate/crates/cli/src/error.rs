//! CLI error carrying the process exit code.
//!
//! Exit codes: 0 success, 2 input validation, 3 empty or degenerate data,
//! 4 solver non-convergence. Every failure prints a single
//! machine-parsable `error: ...` line on stderr.

use rdalloc_core::Error as CoreError;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn validation(message: String) -> Self {
        Self { code: 2, message }
    }

    pub fn degenerate(message: String) -> Self {
        Self { code: 3, message }
    }

    pub fn non_convergence(message: String) -> Self {
        Self { code: 4, message }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match e {
            CoreError::TooFewSamples { .. }
            | CoreError::ZeroTotalVariance
            | CoreError::ZeroMeanDistortion(_)
            | CoreError::EmptyIntersection => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}
