use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Action, ActionPlan};
use crate::canonical;
use crate::geometry::Transform;
use crate::layout::{project_to_terrain, PlacementFlags};
use crate::registry::{ParamValues, Registry};
use crate::scene::{AssetInstance, SceneGraph, OBJECT_TAG};
use crate::terrain::generate_heightfield;

/// Scene metadata key prefix holding each invocation's plugin and params.
pub const INVOCATION_KEY: &str = "api:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub id: String,
    pub kind: String,
    pub executed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub instances_added: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flags: Option<PlacementFlags>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub total: usize,
    pub executed_count: usize,
    pub instance_count: usize,
    pub actions: Vec<ActionOutcome>,
}

impl RunReport {
    pub fn failures(&self) -> impl Iterator<Item = &ActionOutcome> {
        self.actions.iter().filter(|a| !a.executed)
    }

    pub fn all_executed(&self) -> bool {
        self.executed_count == self.total
    }

    pub fn to_json(&self) -> String {
        canonical::to_canonical_string(self).expect("report serializes")
    }
}

struct Source {
    asset_ref: String,
    object: String,
    transform: Option<Transform>,
    layout: Option<String>,
}

/// Runs `plan` on a fresh scene seeded with the plan seed.
pub fn execute_plan(plan: &ActionPlan, registry: &Registry) -> (SceneGraph, RunReport) {
    let mut scene = SceneGraph::new(plan.seed);
    let report = execute_on(&mut scene, plan, registry);
    (scene, report)
}

/// Applies `plan` to an existing scene. Each action either applies fully or
/// leaves the scene untouched and is recorded as failed.
pub fn execute_on(scene: &mut SceneGraph, plan: &ActionPlan, registry: &Registry) -> RunReport {
    let mut ex = Executor::new(std::mem::take(scene), registry);
    for action in &plan.actions {
        ex.apply(action);
    }
    let (s, report) = ex.finish(plan.seed);
    *scene = s;
    report
}

/// Incremental executor: applies actions one at a time while keeping the
/// source table, so planners can inspect the scene between steps.
pub struct Executor<'r> {
    registry: &'r Registry,
    scene: SceneGraph,
    sources: HashMap<String, Source>,
    seen: HashSet<String>,
    outcomes: Vec<ActionOutcome>,
}

impl<'r> Executor<'r> {
    pub fn new(scene: SceneGraph, registry: &'r Registry) -> Self {
        Executor { registry, scene, sources: HashMap::new(), seen: HashSet::new(), outcomes: Vec::new() }
    }

    pub fn scene(&self) -> &SceneGraph {
        &self.scene
    }

    pub fn apply(&mut self, action: &Action) -> &ActionOutcome {
        let before = self.scene.instances.len();
        let result = if self.seen.insert(action.id().to_string()) {
            apply(&mut self.scene, action, self.registry, &mut self.sources)
        } else {
            Err(format!("duplicate action id `{}`", action.id()))
        };
        let (executed, error, flags) = match result {
            Ok(flags) => (true, None, flags),
            Err(e) => {
                tracing::debug!(action = action.id(), error = %e, "action failed");
                (false, Some(e), None)
            }
        };
        self.outcomes.push(ActionOutcome {
            id: action.id().to_string(),
            kind: action.kind().to_string(),
            executed,
            error,
            instances_added: self.scene.instances.len() - before,
            flags,
        });
        self.outcomes.last().expect("just pushed")
    }

    pub fn finish(self, seed: u64) -> (SceneGraph, RunReport) {
        let report = RunReport {
            seed,
            total: self.outcomes.len(),
            executed_count: self.outcomes.iter().filter(|o| o.executed).count(),
            instance_count: self.scene.instances.len(),
            actions: self.outcomes,
        };
        (self.scene, report)
    }
}

fn apply(
    scene: &mut SceneGraph,
    action: &Action,
    registry: &Registry,
    sources: &mut HashMap<String, Source>,
) -> Result<Option<PlacementFlags>, String> {
    match action {
        Action::GenerateTerrain { params, .. } => {
            let hf = generate_heightfield(params).map_err(|e| e.to_string())?;
            scene.terrain = Some(hf);
            Ok(None)
        }
        Action::InvokeApi { id, object, plugin, params, count, transform, layout, update_existing } => {
            let desc = registry.descriptor(plugin).ok_or_else(|| format!("plugin `{plugin}` is not registered"))?;
            let accepted = desc.validate_params(params).map_err(|vs| {
                vs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
            })?;
            if *update_existing {
                return update_invocations(scene, plugin, &accepted.values).map(|_| None);
            }
            let missing = desc.missing_required(params);
            if !missing.is_empty() {
                let names: Vec<_> = missing.iter().map(|p| p.name.as_str()).collect();
                return Err(format!("missing required {}", names.join(", ")));
            }
            if layout.is_none() && *count != 1 {
                return Err(format!("count {count} needs a layout"));
            }
            let full = desc.fill_defaults(&accepted.values);
            let record = serde_json::json!({ "plugin": plugin, "params": full.values });
            let key = format!("{INVOCATION_KEY}{id}");
            if scene.metadata.contains_key(&key) {
                return Err(format!("invocation `{id}` already exists in the scene"));
            }
            let src = Source {
                asset_ref: format!("api:{id}"),
                object: object.clone(),
                transform: *transform,
                layout: layout.clone(),
            };
            if layout.is_none() {
                place_single(scene, id, &src)?;
            }
            scene.metadata.insert(key, canonical::to_canonical_compact(&record).expect("record serializes"));
            sources.insert(id.clone(), src);
            Ok(None)
        }
        Action::ImportAsset { id, object, asset, transform, layout } => {
            if registry.asset(asset).is_none() {
                return Err(format!("asset `{asset}` is not in the catalog"));
            }
            let src = Source {
                asset_ref: format!("asset:{asset}"),
                object: object.clone(),
                transform: *transform,
                layout: layout.clone(),
            };
            if layout.is_none() {
                place_single(scene, id, &src)?;
            }
            sources.insert(id.clone(), src);
            Ok(None)
        }
        Action::PlaceLayout { id, object, layout, project_to_terrain: project } => {
            let src = sources.get(object).ok_or_else(|| format!("source `{object}` has not been executed"))?;
            if src.layout.as_deref() != Some(id.as_str()) {
                return Err(format!("source `{object}` does not reference layout `{id}`"));
            }
            let mut placement = layout.generate().map_err(|e| e.to_string())?;
            if *project {
                let hf = scene.terrain.as_ref().ok_or("terrain projection requested but no terrain exists")?;
                placement = project_to_terrain(&placement, hf);
            }
            let base = src.transform.unwrap_or_default();
            let instances: Vec<AssetInstance> = placement
                .points
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let mut t = p.transform;
                    t.scale = base.scale;
                    let mut inst = instance(format!("{id}/{k}"), src, t, object);
                    inst.terrain_projected = *project;
                    inst
                })
                .collect();
            add_all(scene, instances)?;
            Ok(Some(placement.flags))
        }
    }
}

fn instance(id: String, src: &Source, t: Transform, source_id: &str) -> AssetInstance {
    AssetInstance::new(id, src.asset_ref.clone(), t)
        .with_tag(format!("{OBJECT_TAG}{}", src.object))
        .with_tag(format!("source:{source_id}"))
}

fn place_single(scene: &mut SceneGraph, id: &str, src: &Source) -> Result<(), String> {
    let t = src.transform.unwrap_or_default();
    add_all(scene, vec![instance(format!("{id}/0"), src, t, id)])
}

fn add_all(scene: &mut SceneGraph, instances: Vec<AssetInstance>) -> Result<(), String> {
    let existing: HashSet<&str> = scene.instances.iter().map(|i| i.id.as_str()).collect();
    let mut fresh = HashSet::new();
    for inst in &instances {
        if existing.contains(inst.id.as_str()) || !fresh.insert(inst.id.as_str()) {
            return Err(format!("instance id `{}` already exists", inst.id));
        }
        inst.transform.validate().map_err(|e| format!("instance `{}`: {e}", inst.id))?;
    }
    scene.instances.extend(instances);
    Ok(())
}

fn update_invocations(scene: &mut SceneGraph, plugin: &str, values: &ParamValues) -> Result<(), String> {
    let mut updated: BTreeMap<String, String> = BTreeMap::new();
    for (key, text) in scene.metadata.iter().filter(|(k, _)| k.starts_with(INVOCATION_KEY)) {
        let mut record: Value = serde_json::from_str(text).map_err(|e| format!("corrupt invocation `{key}`: {e}"))?;
        if record["plugin"] != plugin {
            continue;
        }
        let params = record["params"].as_object_mut().ok_or_else(|| format!("corrupt invocation `{key}`"))?;
        for (k, v) in values {
            params.insert(k.clone(), serde_json::to_value(v).expect("param serializes"));
        }
        updated.insert(key.clone(), canonical::to_canonical_compact(&record).expect("record serializes"));
    }
    if updated.is_empty() {
        return Err(format!("no earlier invocation of `{plugin}` to update"));
    }
    scene.metadata.extend(updated);
    Ok(())
}
