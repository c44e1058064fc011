use std::fmt;

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid or unreadable configuration or input data.
    Config(String),
    Lib(spatial_mem::Error),
    /// Output could not be written.
    Io(String),
    /// A PSRF exceeded the threshold and `--force` was not given.
    Gate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Lib(e) if e.is_numeric() => 3,
            CliError::Lib(_) => 2,
            CliError::Io(_) => 1,
            CliError::Gate(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
            CliError::Gate(m) => write!(f, "convergence check failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<spatial_mem::Error> for CliError {
    fn from(e: spatial_mem::Error) -> Self {
        CliError::Lib(e)
    }
}
