use thiserror::Error;

/// Failures of a command-line run, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Numerical(#[from] landscape::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// 2: configuration, 3: non-convergence, 4: insufficient statistics,
    /// 5: any other numerical failure, 1: I/O.
    pub fn exit_code(&self) -> u8 {
        use landscape::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(e) => match e {
                E::Configuration(_) | E::InvalidParameter { .. } | E::DimensionMismatch { .. } => 2,
                E::NonConvergence { .. } => 3,
                E::InsufficientStatistics { .. } => 4,
                _ => 5,
            },
            CliError::Io { .. } => 1,
        }
    }
}
