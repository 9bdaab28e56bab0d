//! The action vocabulary shared by the planner, the executor and external
//! consumers, plus its canonical `plan/1` JSON encoding.
//!
//! Instance placement works in two steps. An `invoke_api` or `import_asset`
//! action declares a source; a later `place_layout` naming that source
//! instantiates it once per layout point. A source without a layout
//! reference places a single instance at its own transform.

mod execute;
mod validate;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use execute::{execute_on, execute_plan, ActionOutcome, Executor, RunReport, INVOCATION_KEY};
pub use validate::{validate_plan, DiagnosticCode, PlanDiagnostic};

use crate::canonical;
use crate::geometry::Transform;
use crate::layout::LayoutSpec;
use crate::registry::ParamValues;
use crate::terrain::TerrainParams;

pub const PLAN_SCHEMA: &str = "plan/1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("plan parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported plan version `{0}`")]
    VersionUnsupported(String),
}

fn default_count() -> usize {
    1
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    GenerateTerrain {
        id: String,
        params: TerrainParams,
    },
    InvokeApi {
        id: String,
        object: String,
        plugin: String,
        params: ParamValues,
        /// Instances expected from the layout. Must be 1 without one.
        #[serde(default = "default_count")]
        count: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        transform: Option<Transform>,
        /// Id of the `place_layout` action that positions this source.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layout: Option<String>,
        /// Re-parameterize earlier invocations of `plugin` instead of
        /// creating instances.
        #[serde(default, skip_serializing_if = "is_false")]
        update_existing: bool,
    },
    ImportAsset {
        id: String,
        object: String,
        asset: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        transform: Option<Transform>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layout: Option<String>,
    },
    PlaceLayout {
        id: String,
        /// Id of the source action.
        object: String,
        layout: LayoutSpec,
        #[serde(default)]
        project_to_terrain: bool,
    },
}

impl Action {
    pub fn id(&self) -> &str {
        match self {
            Action::GenerateTerrain { id, .. }
            | Action::InvokeApi { id, .. }
            | Action::ImportAsset { id, .. }
            | Action::PlaceLayout { id, .. } => id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Action::GenerateTerrain { .. } => "generate_terrain",
            Action::InvokeApi { .. } => "invoke_api",
            Action::ImportAsset { .. } => "import_asset",
            Action::PlaceLayout { .. } => "place_layout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionPlan {
    pub seed: u64,
    pub actions: Vec<Action>,
}

fn parse_error(e: serde_json::Error) -> PlanError {
    PlanError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
}

impl ActionPlan {
    pub fn new(seed: u64) -> Self {
        ActionPlan { seed, actions: Vec::new() }
    }

    pub fn action(&self, id: &str) -> Option<&Action> {
        self.actions.iter().find(|a| a.id() == id)
    }

    /// Canonical pretty JSON with `"schema": "plan/1"`.
    pub fn to_json(&self) -> String {
        let mut v = canonical::to_canonical_value(self).expect("plan serializes");
        v.as_object_mut().expect("plan is an object").insert("schema".into(), Value::String(PLAN_SCHEMA.into()));
        let mut s = serde_json::to_string_pretty(&canonical::sort_keys(v)).expect("plan serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        let v: Value = serde_json::from_str(text).map_err(parse_error)?;
        let obj = v.as_object().ok_or(PlanError::Parse { line: 1, column: 1, message: "expected a JSON object".into() })?;
        match obj.get("schema") {
            Some(Value::String(s)) if s == PLAN_SCHEMA => {}
            Some(Value::String(s)) => return Err(PlanError::VersionUnsupported(s.clone())),
            _ => return Err(PlanError::VersionUnsupported("<missing>".into())),
        }
        // Second pass over the text so typed errors keep their location.
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Wire {
            #[allow(dead_code)]
            schema: String,
            seed: u64,
            actions: Vec<Action>,
        }
        let w: Wire = serde_json::from_str(text).map_err(|e| {
            let mut err = parse_error(e);
            let failing = obj.get("actions").and_then(Value::as_array).and_then(|items| {
                items.iter().position(|a| serde_json::from_value::<Action>(a.clone()).is_err())
            });
            if let (Some(i), PlanError::Parse { message, .. }) = (failing, &mut err) {
                *message = format!("actions[{i}]: {message}");
            }
            err
        })?;
        Ok(ActionPlan { seed: w.seed, actions: w.actions })
    }
}
