use std::path::PathBuf;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A file could not be found or read.
    #[error("input error: {path}: {message}")]
    Input { path: PathBuf, message: String },

    /// Several referenced files are missing at once.
    #[error("input error: {} missing file(s): {}", .0.len(), join_paths(.0))]
    MissingFiles(Vec<PathBuf>),

    /// Bytes or text that do not follow the expected format.
    #[error("format error: {0}")]
    Format(String),

    /// A caller-supplied argument violates an operation's precondition.
    #[error("argument error: {0}")]
    Argument(String),

    /// A manifest entry references an identifier that does not exist.
    #[error("reference error: {0}")]
    Reference(String),

    #[error("insufficient samples: need at least {required}, got {actual}")]
    InsufficientSamples { required: usize, actual: usize },

    /// Failure of a numerical routine (non-convergence, non-finite result).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Wraps another error with the method/sketch it occurred in.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

fn join_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn input(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Input {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn argument(message: impl Into<String>) -> Self {
        Error::Argument(message.into())
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code for the CLI: 2 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Numerical(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
