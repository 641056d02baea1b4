use thiserror::Error;

/// Failures surfaced by the command line, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or out-of-range configuration; exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// A step size or rate outside a stability limit; exit code 3.
    #[error("stability error: {0}")]
    Stability(String),
    /// A numerical routine failed during the run; exit code 3.
    #[error("numerical error: {0}")]
    Numerical(esigma_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stability(_) | CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

impl From<esigma_core::Error> for CliError {
    fn from(e: esigma_core::Error) -> Self {
        use esigma_core::Error as E;
        match e {
            E::Trajectory { index, source } => match CliError::from(*source) {
                CliError::Numerical(inner) => CliError::Numerical(E::Trajectory {
                    index,
                    source: Box::new(inner),
                }),
                other => other,
            },
            E::InvalidParameter { .. } | E::MethodMismatch { .. } | E::SingleLead(_) => {
                CliError::Config(e.to_string())
            }
            E::Stability { .. } | E::UnderResolved { .. } => CliError::Stability(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}
