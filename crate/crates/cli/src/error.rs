use msfc_core::emd::EmdError;
use msfc_core::pipeline::PipelineError;
use msfc_core::series::SeriesError;
use msfc_core::spa::SpaError;
use thiserror::Error;

/// Failure classes, one per exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or configuration.
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or unwritable files.
    #[error("{0}")]
    Data(String),
    /// Decomposition, training or testing failed on valid inputs.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e} (check the path and its permissions)", path.display()))
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::InvalidConfig(m) => {
                CliError::Usage(format!("{m} (fix the config file or command-line flags)"))
            }
            PipelineError::Series(e) => e.into(),
            PipelineError::Io(e) => CliError::Data(format!("writing report: {e}")),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<SeriesError> for CliError {
    fn from(e: SeriesError) -> Self {
        let hint = match e {
            SeriesError::InvalidSplit { .. } => {
                " (set n_estimation and n_holdout under [experiment] so that they sum to the series length)"
            }
            _ => "",
        };
        CliError::Data(format!("{e}{hint}"))
    }
}

impl From<EmdError> for CliError {
    fn from(e: EmdError) -> Self {
        CliError::Numerical(format!("decomposition failed: {e}"))
    }
}

impl From<SpaError> for CliError {
    fn from(e: SpaError) -> Self {
        CliError::Numerical(format!("SPA test failed: {e}"))
    }
}
