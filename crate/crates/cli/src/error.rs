use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("simulation blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error(transparent)]
    Core(anisoldp::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(_) => 2,
            CliError::BlowUp { .. } => 3,
            CliError::CheckFailed(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

impl From<anisoldp::Error> for CliError {
    fn from(e: anisoldp::Error) -> Self {
        match e {
            anisoldp::Error::BlowUp { time, .. } => CliError::BlowUp { time },
            other => CliError::Core(other),
        }
    }
}
