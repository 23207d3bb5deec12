use std::fmt;

/// Command failure, split by the exit code it maps to.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Unreadable or malformed input, bad flag or config value: exit 2.
    Input(String),
    /// Well-formed data that does not line up (lengths, frames): exit 3.
    Semantic(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Semantic(_) => 3,
        }
    }

    /// Prefix the message with where the failure happened.
    pub fn context(self, what: impl fmt::Display) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{what}: {m}")),
            CliError::Semantic(m) => CliError::Semantic(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Semantic(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<vastab_core::Error> for CliError {
    fn from(e: vastab_core::Error) -> Self {
        if e.is_semantic() {
            CliError::Semantic(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}
