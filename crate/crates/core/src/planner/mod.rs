//! The staged planning pipeline: decomposition, terrain, per-object
//! retrieval and hyperparameter generation, relation extraction, placement,
//! and a final execution of the assembled plan.

mod agents;
mod pipeline;
mod prompts;
mod script;
mod template;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agents::{parse_decomposition, parse_hyperparams, parse_relations, strip_fences, Agents, Decomposition, ObjectPlan, MAX_ATTEMPTS};
pub use pipeline::{PipelineOutcome, PipelineReport, Planner, PlannerOptions, PlannerTrace, RetrievalRecord, DEFAULT_MIN_SEPARATION};
pub use script::{record_scripts, Script, ScriptError, ScriptFile, ScriptRun, SCRIPT_MODEL};
pub use template::{build_prompt, PromptTemplate, PromptToggles, TemplateError};

use crate::llm::BackendConfig;
use crate::plan::ActionPlan;
use crate::registry::{ParamKind, ParamSpec, ParamValue};
use crate::retrieval::{EmbedderConfig, DEFAULT_API_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    Prompt,
    Decomposition,
    Clarification,
    Terrain,
    Retrieval,
    Hyperparams,
    Relations,
    Placement,
    Execution,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub stage: Stage,
    pub subject: String,
    pub attempt: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("pipeline failed during {stage}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
    pub attempts: Vec<AttemptRecord>,
    pub partial_plan: Option<ActionPlan>,
}

impl PipelineError {
    pub fn new(stage: Stage, message: impl Into<String>) -> Self {
        PipelineError { stage, message: message.into(), attempts: Vec::new(), partial_plan: None }
    }
}

/// Details the pipeline could not infer. Raised for descriptor parameters
/// that are required and have no default, and for scene descriptions the
/// decomposition agent found too vague.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarificationRequest {
    pub subject: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plugin: Option<String>,
    pub missing: Vec<String>,
    pub questions: Vec<String>,
}

pub type Answers = BTreeMap<String, String>;

pub trait ClarificationHandler {
    /// Returns answers keyed by the request's `missing` names, or `None` to
    /// let the pipeline fall back to feasible defaults.
    fn clarify(&mut self, request: &ClarificationRequest) -> Option<Answers>;
}

/// Never answers; every gap is filled with a feasible default and logged.
#[derive(Debug, Default, Clone, Copy)]
pub struct NonInteractive;

impl ClarificationHandler for NonInteractive {
    fn clarify(&mut self, _request: &ClarificationRequest) -> Option<Answers> {
        None
    }
}

impl<F: FnMut(&ClarificationRequest) -> Option<Answers>> ClarificationHandler for F {
    fn clarify(&mut self, request: &ClarificationRequest) -> Option<Answers> {
        self(request)
    }
}

/// Interprets a free-text answer according to the parameter kind.
pub fn parse_answer(spec: &ParamSpec, text: &str) -> ParamValue {
    let t = text.trim();
    match spec.kind {
        ParamKind::Int => t.parse::<i64>().map(ParamValue::Int).unwrap_or_else(|_| ParamValue::Str(t.into())),
        ParamKind::Float => t.parse::<f64>().map(ParamValue::Float).unwrap_or_else(|_| ParamValue::Str(t.into())),
        ParamKind::Bool => match t.to_ascii_lowercase().as_str() {
            "true" | "yes" | "y" | "1" => ParamValue::Bool(true),
            "false" | "no" | "n" | "0" => ParamValue::Bool(false),
            _ => ParamValue::Str(t.into()),
        },
        ParamKind::Enum | ParamKind::String => ParamValue::Str(t.into()),
    }
}

fn default_domain() -> [f64; 2] {
    [100.0, 100.0]
}

fn default_threshold() -> f64 {
    DEFAULT_API_THRESHOLD
}

/// On-disk pipeline configuration. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub backend: BackendConfig,
    pub registry: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub toggles: PromptToggles,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    #[serde(default = "default_threshold")]
    pub api_threshold: f64,
    /// Ground extent used when the scene has no terrain, meters.
    #[serde(default = "default_domain")]
    pub domain: [f64; 2],
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError::Invalid { path: path.to_path_buf(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.registry = base.join(&cfg.registry);
        if let Some(c) = &cfg.backend.cassette {
            cfg.backend.cassette = Some(base.join(c));
        }
        Ok(cfg)
    }

    pub fn options(&self) -> PlannerOptions {
        PlannerOptions { seed: self.seed, toggles: self.toggles, api_threshold: self.api_threshold, domain: self.domain }
    }
}
