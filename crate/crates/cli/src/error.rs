use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] evpca_core::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("model spec: {0}")]
    ModelSpec(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for input problems, 3 for numeric or regime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if !e.is_input_error() => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
