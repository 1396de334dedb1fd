use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ExpError {
    #[error(transparent)]
    Core(#[from] roughvol::Error),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown scenario '{0}' (builtins: {builtins})", builtins = crate::config::BUILTIN_NAMES.join(", "))]
    UnknownScenario(String),
    #[error("output directory {0} exists and is not empty (use --force to replace it)")]
    OutputExists(PathBuf),
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

pub type ExpResult<T> = std::result::Result<T, ExpError>;

impl ExpError {
    pub fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        ExpError::Io { path: path.into(), message: err.to_string() }
    }

    /// 0 success, 1 usage or configuration, 2 numerical degeneracy, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExpError::Core(roughvol::Error::Degeneracy { .. }) | ExpError::Core(roughvol::Error::NonFiniteWeight { .. }) => 2,
            ExpError::Core(roughvol::Error::Factorization(_)) => 2,
            ExpError::Core(roughvol::Error::Io(_)) | ExpError::Io { .. } | ExpError::OutputExists(_) => 3,
            _ => 1,
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> ExpResult<T> {
    Err(ExpError::Invalid(msg.into()))
}
