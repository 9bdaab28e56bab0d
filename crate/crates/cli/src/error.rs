use std::path::PathBuf;

use serde_json::{json, Value};
use thiserror::Error;

use scenesmith_core::eval::EvalError;
use scenesmith_core::llm::LlmError;
use scenesmith_core::planner::{ConfigError, PipelineError};
use scenesmith_core::registry::RegistryError;
use scenesmith_core::scene::SceneError;
use scenesmith_service::ServiceError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{failed} of {total} actions failed: {ids}")]
    ActionsFailed { failed: usize, total: usize, ids: String },
    #[error("server: {0}")]
    Remote(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// Machine-readable form printed with `--json-errors`.
    pub fn to_json(&self) -> Value {
        let kind = match self {
            CliError::Registry(e) => e.kind(),
            CliError::Pipeline(_) => "PipelineError",
            CliError::Config(_) => "ConfigError",
            CliError::Backend(_) => "BackendError",
            CliError::Eval(_) => "EvalError",
            CliError::Scene(_) => "SceneError",
            CliError::Service(e) => e.kind(),
            CliError::Usage(_) => "UsageError",
            CliError::Io { .. } => "IoError",
            CliError::ActionsFailed { .. } => "ActionsFailed",
            CliError::Remote(_) => "RemoteError",
        };
        let mut v = json!({"error": kind, "message": self.to_string()});
        match self {
            CliError::Pipeline(e) => {
                v["stage"] = json!(e.stage);
                v["attempts"] = json!(e.attempts);
            }
            CliError::Registry(RegistryError::Schema { path, field, .. }) => {
                v["path"] = json!(path);
                v["field"] = json!(field);
            }
            _ => {}
        }
        v
    }
}
