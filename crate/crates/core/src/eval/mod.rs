//! ER@1 / SR@1 scoring and the dataset-driven evaluation harness.
//!
//! `er = 100 * executed / total` and `sr = 100 * correct / executed`. A case
//! is executed when every action of its plan ran, and correct when it was
//! executed and all of its programmatic checks pass.

mod checks;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checks::Check;

use crate::canonical;
use crate::llm::{BackendConfig, BackendKind, LlmBackend, LlmError};
use crate::plan::{ActionPlan, RunReport};
use crate::planner::{NonInteractive, Planner, PlannerOptions};
use crate::registry::Registry;
use crate::retrieval::Embedder;
use crate::scene::SceneGraph;

pub const DATASET_SCHEMA: &str = "eval/1";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no outcomes to score")]
    EmptyOutcomes,
    #[error("dataset {path}: {message}")]
    Dataset { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub total: usize,
    pub executed: usize,
    pub correct: usize,
    pub er_at_1: f64,
    pub sr_at_1: f64,
    /// Set when nothing executed, so `sr_at_1` is reported as 0.
    pub sr_undefined: bool,
}

/// Scores raw counts. `correct` counts only executed cases.
pub fn metrics_from_counts(total: usize, executed: usize, correct: usize) -> Result<Metrics, EvalError> {
    if total == 0 {
        return Err(EvalError::EmptyOutcomes);
    }
    assert!(executed <= total && correct <= executed, "counts must satisfy correct <= executed <= total");
    let er = 100.0 * executed as f64 / total as f64;
    let (sr, undefined) = if executed == 0 { (0.0, true) } else { (100.0 * correct as f64 / executed as f64, false) };
    Ok(Metrics { total, executed, correct, er_at_1: er, sr_at_1: sr, sr_undefined: undefined })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub id: String,
    pub executed: bool,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_checks: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn compute_metrics(outcomes: &[CaseOutcome]) -> Result<Metrics, EvalError> {
    let executed = outcomes.iter().filter(|o| o.executed).count();
    let correct = outcomes.iter().filter(|o| o.executed && o.correct).count();
    metrics_from_counts(outcomes.len(), executed, correct)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalCase {
    pub id: String,
    pub description: String,
    pub checks: Vec<Check>,
    /// Replay transcript for this case, relative to the dataset file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cassette: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub schema: String,
    #[serde(default)]
    pub name: String,
    pub cases: Vec<EvalCase>,
}

impl Dataset {
    pub fn parse(text: &str, path: &Path) -> Result<Self, EvalError> {
        let err = |message: String| EvalError::Dataset { path: path.to_path_buf(), message };
        let mut ds: Dataset =
            serde_json::from_str(text).map_err(|e| err(format!("line {} column {}: {e}", e.line(), e.column())))?;
        if ds.schema != DATASET_SCHEMA {
            return Err(err(format!("unsupported schema `{}`", ds.schema)));
        }
        if ds.cases.is_empty() {
            return Err(err("dataset has no cases".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for c in &ds.cases {
            if !ids.insert(c.id.as_str()) {
                return Err(err(format!("duplicate case id `{}`", c.id)));
            }
            if c.checks.is_empty() {
                return Err(err(format!("case `{}` has no checks", c.id)));
            }
            if c.description.trim().is_empty() {
                return Err(err(format!("case `{}` has an empty description", c.id)));
            }
        }
        let base = path.parent().unwrap_or(Path::new("."));
        for c in &mut ds.cases {
            if let Some(p) = &c.cassette {
                c.cassette = Some(base.join(p));
            }
        }
        Ok(ds)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EvalError::Dataset { path: path.to_path_buf(), message: e.to_string() })?;
        Self::parse(&text, path)
    }
}

/// Scores one pipeline run against a case's checks.
pub fn judge_case(case: &EvalCase, scene: &SceneGraph, plan: &ActionPlan, report: &RunReport) -> CaseOutcome {
    let executed = report.total > 0 && report.all_executed();
    let failed_checks: Vec<String> = if executed {
        case.checks.iter().filter_map(|c| c.evaluate(scene, plan).err()).collect()
    } else {
        Vec::new()
    };
    let error = (!executed).then(|| {
        let failed: Vec<&str> = report.failures().map(|f| f.id.as_str()).collect();
        if failed.is_empty() {
            "plan has no actions".to_string()
        } else {
            format!("failed actions: {}", failed.join(", "))
        }
    });
    CaseOutcome { id: case.id.clone(), executed, correct: executed && failed_checks.is_empty(), failed_checks, error }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub prompt_components: String,
    pub metrics: Metrics,
    pub cases: Vec<CaseOutcome>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        canonical::to_canonical_string(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        let m = &self.metrics;
        let mut s = String::new();
        let _ = writeln!(s, "# Evaluation: {}\n", self.dataset);
        let _ = writeln!(s, "Prompt components: {}\n", self.prompt_components);
        let _ = writeln!(s, "| cases | executed | correct | ER@1 | SR@1 |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        let sr = if m.sr_undefined { "n/a".to_string() } else { format!("{:.2}", m.sr_at_1) };
        let _ = writeln!(s, "| {} | {} | {} | {:.2} | {} |\n", m.total, m.executed, m.correct, m.er_at_1, sr);
        let _ = writeln!(s, "| case | executed | correct | notes |");
        let _ = writeln!(s, "|---|---|---|---|");
        for c in &self.cases {
            let notes = c.error.clone().unwrap_or_else(|| c.failed_checks.join("; "));
            let _ = writeln!(s, "| {} | {} | {} | {} |", c.id, c.executed, c.correct, notes.replace('|', "\\|"));
        }
        s
    }
}

/// Runs every case with a backend from `make_backend`. Cases run in
/// parallel; outcome order follows the dataset.
pub fn run_suite_with<F>(
    dataset: &Dataset,
    registry: &Registry,
    embedder: &dyn Embedder,
    options: PlannerOptions,
    make_backend: F,
) -> Result<EvalReport, EvalError>
where
    F: Fn(&EvalCase) -> Result<Box<dyn LlmBackend>, LlmError> + Sync,
{
    if dataset.cases.is_empty() {
        return Err(EvalError::Dataset { path: PathBuf::new(), message: "dataset has no cases".into() });
    }
    let cases: Vec<CaseOutcome> = dataset
        .cases
        .par_iter()
        .map(|case| {
            let failed = |e: String| CaseOutcome {
                id: case.id.clone(),
                executed: false,
                correct: false,
                failed_checks: vec![],
                error: Some(e),
            };
            let llm = match make_backend(case) {
                Ok(b) => b,
                Err(e) => return failed(e.to_string()),
            };
            let planner = match Planner::new(registry, llm.as_ref(), embedder, options) {
                Ok(p) => p,
                Err(e) => return failed(e.to_string()),
            };
            match planner.generate(&case.description, &mut NonInteractive) {
                Ok(out) => judge_case(case, &out.scene, &out.plan, &out.report.run),
                Err(e) => failed(e.to_string()),
            }
        })
        .collect();
    let metrics = compute_metrics(&cases)?;
    Ok(EvalReport { dataset: dataset.name.clone(), prompt_components: options.toggles.label(), metrics, cases })
}

/// Runs a dataset with `backend`. Replay backends use each case's own
/// cassette when it has one.
pub fn run_suite(
    dataset: &Dataset,
    registry: &Registry,
    embedder: &dyn Embedder,
    options: PlannerOptions,
    backend: &BackendConfig,
) -> Result<EvalReport, EvalError> {
    run_suite_with(dataset, registry, embedder, options, |case| {
        let mut cfg = backend.clone();
        if cfg.kind == BackendKind::Replay {
            if let Some(c) = &case.cassette {
                cfg.cassette = Some(c.clone());
            }
        }
        cfg.build()
    })
}
