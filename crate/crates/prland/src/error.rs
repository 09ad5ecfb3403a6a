use std::fmt;
use std::path::PathBuf;

/// Failure classes of the command-line front end. Each maps to its own exit
/// status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    ConfigNotFound(PathBuf),
    ConfigMalformed { path: PathBuf, message: String },
    MissingInput(String),
    Io { path: PathBuf, source: std::io::Error },
    Format(String),
    Numerical(prland_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::ConfigNotFound(_) => 3,
            CliError::ConfigMalformed { .. } => 4,
            CliError::MissingInput(_) => 5,
            CliError::Io { .. } => 6,
            CliError::Format(_) => 7,
            CliError::Numerical(e) => match e {
                prland_core::Error::Convergence { .. } | prland_core::Error::Bracketing(_) => 9,
                prland_core::Error::ResourceLimit { .. } => 10,
                _ => 8,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::ConfigNotFound(_) => "config-not-found",
            CliError::ConfigMalformed { .. } => "config-malformed",
            CliError::MissingInput(_) => "missing-input",
            CliError::Io { .. } => "io",
            CliError::Format(_) => "format",
            CliError::Numerical(e) => match e {
                prland_core::Error::Convergence { .. } | prland_core::Error::Bracketing(_) => "convergence",
                prland_core::Error::ResourceLimit { .. } => "resource-limit",
                _ => "numerical",
            },
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::ConfigNotFound(p) => write!(f, "config file not found: {}", p.display()),
            CliError::ConfigMalformed { path, message } => write!(f, "malformed config {}: {message}", path.display()),
            CliError::MissingInput(m) => write!(f, "missing input: {m}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Format(m) => write!(f, "bad file format: {m}"),
            CliError::Numerical(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<prland_core::Error> for CliError {
    fn from(e: prland_core::Error) -> Self {
        CliError::Numerical(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Format(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
