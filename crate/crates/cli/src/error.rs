//! Process-level error type mapping every failure to a stable exit code:
//! 1 for flag or config validation, 2 for missing or unreadable files,
//! 3 for numerical divergence during training.

use chrseg_core::baselines::BaselineError;
use chrseg_core::dataset::DatasetError;
use chrseg_core::datagen::DatagenError;
use chrseg_core::evaluation::EvalError;
use chrseg_core::network::{CheckpointError, NetworkError};
use chrseg_core::preprocess::PreprocessError;
use chrseg_core::tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid {what}: {why}")]
    Invalid { what: String, why: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    BadFile { path: String, source: Box<dyn std::error::Error + Send + Sync> },
    #[error("numerical divergence: {0}")]
    Diverged(String),
    #[error(transparent)]
    Run(Box<dyn std::error::Error + Send + Sync>),
}

impl CliError {
    pub fn invalid(what: impl Into<String>, why: impl Into<String>) -> Self {
        CliError::Invalid { what: what.into(), why: why.into() }
    }

    /// Exit code contract: validation 1, file problems 2, divergence 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid { .. } => 1,
            CliError::Io { .. } | CliError::BadFile { .. } => 2,
            CliError::Diverged(_) => 3,
            CliError::Run(_) => 1,
        }
    }
}

/// Tags an error with the file it came from, keeping exit code 2.
pub fn bad_file<E>(path: &std::path::Path) -> impl FnOnce(E) -> CliError + '_
where
    E: std::error::Error + Send + Sync + 'static,
{
    move |source| CliError::BadFile { path: path.display().to_string(), source: Box::new(source) }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::NonFiniteLoss { epoch, batch } => {
                CliError::Diverged(format!("non-finite loss at epoch {epoch}, batch {batch}"))
            }
            // A non-finite tensor mid-run means the parameters blew up.
            NetworkError::Tensor(TensorError::NonFinite { op }) => {
                CliError::Diverged(format!("non-finite values reached {op}"))
            }
            other => CliError::Run(Box::new(other)),
        }
    }
}

impl From<DatagenError> for CliError {
    fn from(e: DatagenError) -> Self {
        CliError::Run(Box::new(e))
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        CliError::Run(Box::new(e))
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Run(Box::new(e))
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        CliError::Run(Box::new(e))
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Run(Box::new(e))
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Run(Box::new(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(CliError::invalid("flag", "x").exit_code(), 1);
        let io = CliError::Io {
            path: "p".into(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "gone"),
        };
        assert_eq!(io.exit_code(), 2);
        assert_eq!(CliError::Diverged("loss".into()).exit_code(), 3);
    }

    #[test]
    fn non_finite_loss_maps_to_divergence() {
        let e: CliError = NetworkError::NonFiniteLoss { epoch: 3, batch: 1 }.into();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("epoch 3"));
    }
}
