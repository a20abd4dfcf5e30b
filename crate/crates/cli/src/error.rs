//! Exit-code classification: 2 for spec or data problems, 3 for
//! infeasible constraint systems, 4 for numerical failures.

use liquid_scorecard::Error;

#[derive(Debug)]
pub struct CmdError {
    code: i32,
    message: String,
}

impl CmdError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }

    /// Maps a library error by its root cause; the message keeps the full
    /// stage-annotated chain.
    pub fn from_core(err: Error) -> Self {
        let code = match err.root() {
            Error::Infeasible(_) => 3,
            Error::NotPsd | Error::NotSymmetric(_) | Error::ZeroVariance => 4,
            _ => 2,
        };
        Self { code, message: err.to_string() }
    }

    pub fn code(&self) -> i32 {
        self.code
    }

    pub fn message(&self) -> &str {
        &self.message
    }
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CmdError {}
