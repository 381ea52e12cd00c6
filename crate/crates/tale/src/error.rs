use std::path::{Path, PathBuf};

use tale_core::harness::HarnessError;
use tale_core::nn::NnError;
use tale_core::planner::PlanError;

#[derive(Debug, thiserror::Error)]
pub enum TaleError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Config(String),
    #[error("plan: {0}")]
    Plan(String),
    #[error("scene: {0}")]
    Scene(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("llm backend: {0}")]
    Backend(String),
    #[error(transparent)]
    Harness(HarnessError),
}

impl TaleError {
    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> TaleError + '_ {
        move |source| TaleError::Io { path: path.to_path_buf(), source }
    }

    /// Process exit code: 3 config, 4 plan, 5 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            TaleError::Config(_) | TaleError::Scene(_) => 3,
            TaleError::Harness(HarnessError::Config(_)) => 3,
            TaleError::Plan(_) | TaleError::Backend(_) => 4,
            TaleError::Harness(HarnessError::PlanMismatch(_)) => 4,
            _ => 5,
        }
    }
}

impl From<HarnessError> for TaleError {
    fn from(e: HarnessError) -> Self {
        TaleError::Harness(e)
    }
}

impl From<PlanError> for TaleError {
    fn from(e: PlanError) -> Self {
        TaleError::Plan(e.to_string())
    }
}

impl From<NnError> for TaleError {
    fn from(e: NnError) -> Self {
        TaleError::Checkpoint(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, TaleError>;
