//! Strict-JSON agents. Each reply is parsed against a fixed schema; on
//! failure the error is appended to the conversation and the model is asked
//! again, up to [`MAX_ATTEMPTS`] times.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::prompts;
use super::template::{build_prompt, PromptToggles};
use super::{AttemptRecord, ClarificationRequest, PipelineError, Stage};
use crate::layout::{relation_descriptor, SpatialRelation};
use crate::llm::{ChatMessage, LlmBackend};
use crate::registry::{ParamValues, PluginDescriptor, Registry};

pub const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectPlan {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, rename = "modules")]
    pub module_hints: BTreeMap<String, String>,
    #[serde(default)]
    pub update: bool,
}

impl ObjectPlan {
    /// Text used for retrieval and hyperparameter prompts.
    pub fn query_text(&self) -> String {
        let mut s = self.name.clone();
        if !self.description.is_empty() {
            s.push_str(": ");
            s.push_str(&self.description);
        }
        for v in self.module_hints.values() {
            s.push_str("; ");
            s.push_str(v);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decomposition {
    Objects(Vec<ObjectPlan>),
    Clarify(ClarificationRequest),
}

/// Shared context for agent calls.
pub struct Agents<'a> {
    pub llm: &'a dyn LlmBackend,
    pub toggles: PromptToggles,
}

/// Removes a surrounding Markdown code fence, if any.
pub fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else { return t };
    let body = rest.split_once('\n').map_or("", |(_, b)| b);
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

fn json_error(e: serde_json::Error) -> String {
    format!("invalid JSON at line {} column {}: {e}", e.line(), e.column())
}

impl Agents<'_> {
    fn ask<T>(
        &self,
        stage: Stage,
        subject: &str,
        system: String,
        user: String,
        log: &mut Vec<AttemptRecord>,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, PipelineError> {
        let mut messages = vec![ChatMessage::system(system), ChatMessage::user(user)];
        let mut last_error = String::new();
        for attempt in 1..=MAX_ATTEMPTS {
            let reply = self.llm.complete(&messages).map_err(|e| {
                log.push(AttemptRecord { stage, subject: subject.into(), attempt, error: Some(e.to_string()) });
                PipelineError::new(stage, format!("{subject}: {e}"))
            })?;
            match parse(strip_fences(&reply)) {
                Ok(v) => {
                    log.push(AttemptRecord { stage, subject: subject.into(), attempt, error: None });
                    return Ok(v);
                }
                Err(e) => {
                    tracing::info!(?stage, subject, attempt, error = %e, "agent reply rejected");
                    log.push(AttemptRecord { stage, subject: subject.into(), attempt, error: Some(e.clone()) });
                    let shown = if reply.trim().is_empty() { "(empty reply)".to_string() } else { reply };
                    messages.push(ChatMessage::assistant(shown));
                    messages.push(ChatMessage::user(format!(
                        "Your previous reply was rejected: {e}\nReply again with only the corrected JSON object."
                    )));
                    last_error = e;
                }
            }
        }
        Err(PipelineError::new(
            stage,
            format!("{subject}: no valid reply after {MAX_ATTEMPTS} attempts; last error: {last_error}"),
        ))
    }

    pub fn decompose(
        &self,
        query: &str,
        existing: &[String],
        registry: &Registry,
        log: &mut Vec<AttemptRecord>,
    ) -> Result<Decomposition, PipelineError> {
        let system = build_prompt(&prompts::decomposition(registry), &self.toggles)
            .map_err(|e| PipelineError::new(Stage::Prompt, e.to_string()))?;
        let mut user = format!("Scene description: {query}");
        if !existing.is_empty() {
            user.push_str(&format!("\nExisting objects: {}", existing.join(", ")));
        }
        self.ask(Stage::Decomposition, "scene", system, user, log, parse_decomposition)
    }

    pub fn extract_relations(
        &self,
        query: &str,
        objects: &[ObjectPlan],
        anchors: &BTreeSet<String>,
        log: &mut Vec<AttemptRecord>,
    ) -> Result<Vec<SpatialRelation>, PipelineError> {
        let system = build_prompt(&prompts::relations(), &self.toggles)
            .map_err(|e| PipelineError::new(Stage::Prompt, e.to_string()))?;
        let listed: Vec<String> = objects
            .iter()
            .map(|o| match o.count {
                Some(c) => format!("{} ({c})", o.name),
                None => o.name.clone(),
            })
            .collect();
        let user = format!(
            "Scene description: {query}\nObjects: {}\nAnchors: {}",
            listed.join(", "),
            anchors.iter().cloned().collect::<Vec<_>>().join(", ")
        );
        let subjects: BTreeSet<&str> = objects.iter().map(|o| o.name.as_str()).collect();
        self.ask(Stage::Relations, "relations", system, user, log, |text| parse_relations(text, &subjects, anchors))
    }

    pub fn generate_hyperparams(
        &self,
        descriptor: &PluginDescriptor,
        object: &ObjectPlan,
        log: &mut Vec<AttemptRecord>,
    ) -> Result<ParamValues, PipelineError> {
        let system = build_prompt(&prompts::hyperparams(descriptor), &self.toggles)
            .map_err(|e| PipelineError::new(Stage::Prompt, e.to_string()))?;
        let user = format!("Object \"{}\": {}", object.name, object.query_text());
        self.ask(Stage::Hyperparams, &object.name, system, user, log, |text| parse_hyperparams(text, descriptor))
    }
}

pub fn parse_decomposition(text: &str) -> Result<Decomposition, String> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Wire {
        objects: Vec<ObjectPlan>,
        #[serde(default)]
        questions: Vec<String>,
    }
    let w: Wire = serde_json::from_str(text).map_err(json_error)?;
    if w.objects.is_empty() {
        if w.questions.is_empty() {
            return Err("no objects and no questions".into());
        }
        return Ok(Decomposition::Clarify(ClarificationRequest {
            subject: "scene".into(),
            plugin: None,
            missing: vec!["details".into()],
            questions: w.questions,
        }));
    }
    let mut seen = BTreeSet::new();
    for o in &w.objects {
        if o.name.trim().is_empty() {
            return Err("object name must not be empty".into());
        }
        if !seen.insert(o.name.trim().to_lowercase()) {
            return Err(format!("object `{}` is listed twice", o.name));
        }
    }
    Ok(Decomposition::Objects(
        w.objects.into_iter().map(|o| ObjectPlan { name: o.name.trim().to_string(), ..o }).collect(),
    ))
}

pub fn parse_relations(
    text: &str,
    subjects: &BTreeSet<&str>,
    anchors: &BTreeSet<String>,
) -> Result<Vec<SpatialRelation>, String> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Wire {
        relations: Vec<SpatialRelation>,
    }
    let w: Wire = serde_json::from_str(text).map_err(json_error)?;
    let mut errors = Vec::new();
    for (i, r) in w.relations.iter().enumerate() {
        if !subjects.contains(r.subject.as_str()) {
            errors.push(format!("relations[{i}]: unknown subject `{}`", r.subject));
        }
        if !anchors.contains(&r.anchor) {
            errors.push(format!("relations[{i}]: unknown anchor `{}`", r.anchor));
        }
        if r.anchor == r.subject {
            errors.push(format!("relations[{i}]: `{}` cannot be its own anchor", r.subject));
        }
        if let Err(vs) = relation_descriptor(r.kind).validate_params(&r.params) {
            for v in vs {
                errors.push(format!("relations[{i}].params.{v}"));
            }
        }
    }
    if errors.is_empty() {
        Ok(w.relations)
    } else {
        Err(errors.join("; "))
    }
}

pub fn parse_hyperparams(text: &str, descriptor: &PluginDescriptor) -> Result<ParamValues, String> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Wire {
        params: ParamValues,
    }
    let w: Wire = serde_json::from_str(text).map_err(json_error)?;
    descriptor
        .validate_params(&w.params)
        .map(|a| a.values)
        .map_err(|vs| vs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
}
