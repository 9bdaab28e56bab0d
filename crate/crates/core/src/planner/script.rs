//! Scripted sessions for authoring replay cassettes. A script pairs a query
//! with the replies a model should give; running it through the real
//! pipeline with a recording backend captures the exact prompts, so the
//! resulting cassette replays byte-for-byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{NonInteractive, PipelineError, PipelineOutcome, Planner, PlannerOptions, PromptToggles};
use crate::llm::{LlmBackend, LlmError, RecordingBackend, ScriptedMock};
use crate::registry::{Registry, RegistryError};
use crate::retrieval::{Embedder, DEFAULT_API_THRESHOLD};

/// Model name written into authored cassettes; matches the replay default.
pub const SCRIPT_MODEL: &str = "replay";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    pub name: String,
    pub query: String,
    #[serde(default)]
    pub seed: u64,
    /// Prompt components, e.g. `"R,T,D,F"`; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<String>,
    /// Name of an earlier script whose scene this one edits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    /// Cassette path, relative to the script file.
    pub cassette: PathBuf,
    /// Replies in call order. Strings are sent verbatim, anything else as
    /// compact JSON.
    pub responses: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptFile {
    pub registry: PathBuf,
    #[serde(default = "default_threshold")]
    pub api_threshold: f64,
    pub scripts: Vec<Script>,
}

fn default_threshold() -> f64 {
    DEFAULT_API_THRESHOLD
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("script `{name}`: {message}")]
    Invalid { name: String, message: String },
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug)]
pub struct ScriptRun {
    pub name: String,
    pub cassette: PathBuf,
    pub outcome: Result<PipelineOutcome, PipelineError>,
    /// Replies the pipeline never asked for.
    pub unused: usize,
}

impl Script {
    fn replies(&self) -> Vec<String> {
        self.responses
            .iter()
            .map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect()
    }
}

/// Runs every script in `path`, writing cassettes below `out_root` (the
/// script file's directory when `None`).
pub fn record_scripts(
    path: &Path,
    out_root: Option<&Path>,
    embedder: &dyn Embedder,
) -> Result<Vec<ScriptRun>, ScriptError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ScriptError::Read { path: path.into(), message: e.to_string() })?;
    let file: ScriptFile =
        serde_json::from_str(&text).map_err(|e| ScriptError::Read { path: path.into(), message: e.to_string() })?;
    let base_dir = path.parent().unwrap_or(Path::new("."));
    let registry = Registry::load_dir(&base_dir.join(&file.registry))?;
    let out_root = out_root.unwrap_or(base_dir);

    let mut runs: Vec<ScriptRun> = Vec::new();
    let mut scenes = BTreeMap::new();
    for script in &file.scripts {
        let invalid = |message: String| ScriptError::Invalid { name: script.name.clone(), message };
        let toggles = match &script.components {
            Some(c) => PromptToggles::from_components(c).map_err(|e| invalid(e.to_string()))?,
            None => PromptToggles::default(),
        };
        let cassette = out_root.join(&script.cassette);
        if cassette.exists() {
            std::fs::remove_file(&cassette).map_err(|e| invalid(e.to_string()))?;
        }
        let mock = Arc::new(ScriptedMock::new(SCRIPT_MODEL, script.replies()));
        let recorder = RecordingBackend::open(Box::new(Arc::clone(&mock)), cassette.clone())?;
        let options =
            PlannerOptions { seed: script.seed, toggles, api_threshold: file.api_threshold, ..Default::default() };
        let planner = Planner::new(&registry, &recorder as &dyn LlmBackend, embedder, options)
            .map_err(|e| invalid(e.to_string()))?;
        let outcome = match &script.base {
            None => planner.generate(&script.query, &mut NonInteractive),
            Some(b) => {
                let base = scenes.get(b).ok_or_else(|| invalid(format!("unknown or failed base `{b}`")))?;
                planner.edit(base, &script.query, &mut NonInteractive)
            }
        };
        if let Ok(out) = &outcome {
            scenes.insert(script.name.clone(), out.scene.clone());
        }
        runs.push(ScriptRun { name: script.name.clone(), cassette, outcome, unused: mock.remaining() });
    }
    Ok(runs)
}
