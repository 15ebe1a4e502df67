use std::io;
use std::path::PathBuf;

/// Process exit status for each failure class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const NUMERIC: i32 = 2;
    pub const VERIFY_FAIL: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("cannot read config {}: {source}", path.display())]
    ReadConfig { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Core(#[from] matconc_core::Error),

    #[error("cannot write output: {0}")]
    Io(#[from] io::Error),

    #[error("cannot start worker threads: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),

    #[error("{name} = {value:?} is not a positive integer")]
    Env { name: &'static str, value: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(matconc_core::Error::NoConvergence { .. }) => exit::NUMERIC,
            CliError::Io(_) | CliError::ThreadPool(_) => exit::NUMERIC,
            _ => exit::VALIDATION,
        }
    }
}
