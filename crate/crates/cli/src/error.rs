use std::fmt;

/// CLI-level errors, mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or parameters (exit 2).
    Config(String),
    /// Filesystem problems, including missing stage inputs (exit 3).
    Io(String),
    /// Numerical failures (exit 4).
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<qwdm::Error> for CliError {
    fn from(e: qwdm::Error) -> Self {
        use qwdm::Error::*;
        match e {
            Numerical(_) | DegeneratePosterior { .. } => CliError::Numerical(e.to_string()),
            Format(_) => CliError::Io(e.to_string()),
            InvalidGraph(_) | Parameter(_) | Shape(_) | InsufficientSamples { .. } => {
                CliError::Config(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
