use std::fmt;

/// Failure classes with a stable exit-code contract: usage errors exit 2,
/// computation and I/O failures exit 1. A consumer closing stdout early
/// (`fadcap sweep | head`) is not a failure.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
    ClosedPipe,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Failure(_) => 1,
            Self::ClosedPipe => 0,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(msg) => write!(f, "usage error: {msg}"),
            Self::Failure(msg) => write!(f, "{msg}"),
            Self::ClosedPipe => write!(f, "output pipe closed"),
        }
    }
}

impl From<fadcap_core::allocation::AllocationError> for CliError {
    fn from(err: fadcap_core::allocation::AllocationError) -> Self {
        Self::Failure(format!("allocation failed: {err}"))
    }
}

impl From<fadcap_core::capacity::CapacityError> for CliError {
    fn from(err: fadcap_core::capacity::CapacityError) -> Self {
        Self::Failure(format!("capacity evaluation failed: {err}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        if err.kind() == std::io::ErrorKind::BrokenPipe {
            Self::ClosedPipe
        } else {
            Self::Failure(format!("i/o error: {err}"))
        }
    }
}
