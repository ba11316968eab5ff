use std::fmt;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Geometry(String),
    Divergence(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Geometry(_) => 4,
            CliError::Divergence(_) => 5,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m)
            | CliError::Io(m)
            | CliError::Geometry(m)
            | CliError::Divergence(m)
            | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<fri_sr::Error> for CliError {
    fn from(e: fri_sr::Error) -> Self {
        use fri_sr::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidArgument(_) => CliError::Usage(msg),
            E::Geometry(_) => CliError::Geometry(msg),
            E::Divergence(_) => CliError::Divergence(msg),
            E::Format(_) | E::Io(_) => CliError::Io(msg),
            E::Linalg(_) => CliError::Internal(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
