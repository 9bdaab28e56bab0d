use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Action, ActionPlan};
use crate::registry::Registry;
use crate::scene::SceneGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticCode {
    DuplicateActionId,
    UnknownPlugin,
    UnknownAsset,
    InvalidParams,
    MissingRequired,
    InvalidTerrain,
    UnresolvedReference,
    LayoutMismatch,
    CountWithoutLayout,
    /// A terrain-projected layout precedes every `generate_terrain`.
    Ordering,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDiagnostic {
    pub index: usize,
    pub action: String,
    pub code: DiagnosticCode,
    pub message: String,
}

impl fmt::Display for PlanDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "action {} (`{}`): {}", self.index, self.action, self.message)
    }
}

/// Static checks over a plan: references, ordering, parameter validity.
/// `scene` supplies terrain that already exists when the plan is an edit.
pub fn validate_plan(plan: &ActionPlan, registry: &Registry, scene: Option<&SceneGraph>) -> Vec<PlanDiagnostic> {
    let mut out = Vec::new();
    let mut push = |index: usize, action: &Action, code: DiagnosticCode, message: String| {
        out.push(PlanDiagnostic { index, action: action.id().to_string(), code, message })
    };

    let positions: HashMap<&str, usize> = plan.actions.iter().enumerate().map(|(i, a)| (a.id(), i)).collect();
    let mut seen = HashSet::new();
    let mut terrain_ready = scene.is_some_and(|s| s.terrain.is_some());

    for (i, action) in plan.actions.iter().enumerate() {
        if !seen.insert(action.id()) {
            push(i, action, DiagnosticCode::DuplicateActionId, format!("duplicate action id `{}`", action.id()));
        }
        match action {
            Action::GenerateTerrain { params, .. } => match params.validate() {
                Ok(()) => terrain_ready = true,
                Err(e) => push(i, action, DiagnosticCode::InvalidTerrain, e.to_string()),
            },
            Action::InvokeApi { plugin, params, count, layout, update_existing, .. } => {
                match registry.descriptor(plugin) {
                    None => push(i, action, DiagnosticCode::UnknownPlugin, format!("plugin `{plugin}` is not registered")),
                    Some(desc) => {
                        if let Err(vs) = desc.validate_params(params) {
                            let msg = vs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
                            push(i, action, DiagnosticCode::InvalidParams, msg);
                        }
                        let missing = desc.missing_required(params);
                        if !missing.is_empty() && !update_existing {
                            let names: Vec<_> = missing.iter().map(|p| p.name.as_str()).collect();
                            push(i, action, DiagnosticCode::MissingRequired, format!("missing required {}", names.join(", ")));
                        }
                    }
                }
                check_source_layout(plan, &positions, i, action, layout.as_deref(), &mut push);
                if layout.is_none() && *count != 1 && !update_existing {
                    push(i, action, DiagnosticCode::CountWithoutLayout, format!("count {count} needs a layout"));
                }
            }
            Action::ImportAsset { asset, layout, .. } => {
                if registry.asset(asset).is_none() {
                    push(i, action, DiagnosticCode::UnknownAsset, format!("asset `{asset}` is not in the catalog"));
                }
                check_source_layout(plan, &positions, i, action, layout.as_deref(), &mut push);
            }
            Action::PlaceLayout { object, project_to_terrain, .. } => {
                match positions.get(object.as_str()).map(|&j| (j, &plan.actions[j])) {
                    Some((j, Action::InvokeApi { .. } | Action::ImportAsset { .. })) if j < i => {}
                    Some((j, _)) if j >= i => push(
                        i,
                        action,
                        DiagnosticCode::Ordering,
                        format!("source `{object}` must precede its layout"),
                    ),
                    _ => push(
                        i,
                        action,
                        DiagnosticCode::UnresolvedReference,
                        format!("`{object}` is not an invoke_api or import_asset action"),
                    ),
                }
                if *project_to_terrain && !terrain_ready {
                    push(i, action, DiagnosticCode::Ordering, "terrain projection before any generate_terrain".into());
                }
            }
        }
    }
    out
}

fn check_source_layout(
    plan: &ActionPlan,
    positions: &HashMap<&str, usize>,
    i: usize,
    action: &Action,
    layout: Option<&str>,
    push: &mut impl FnMut(usize, &Action, DiagnosticCode, String),
) {
    let Some(layout) = layout else { return };
    match positions.get(layout).map(|&j| &plan.actions[j]) {
        Some(Action::PlaceLayout { object, .. }) if object == action.id() => {}
        Some(Action::PlaceLayout { object, .. }) => push(
            i,
            action,
            DiagnosticCode::LayoutMismatch,
            format!("layout `{layout}` places `{object}`, not this action"),
        ),
        _ => push(i, action, DiagnosticCode::UnresolvedReference, format!("layout `{layout}` not found in plan")),
    }
}
