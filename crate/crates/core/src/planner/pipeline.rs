use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::agents::{Agents, Decomposition, ObjectPlan};
use super::template::PromptToggles;
use super::{parse_answer, AttemptRecord, ClarificationHandler, ClarificationRequest, PipelineError, Stage};
use crate::canonical;
use crate::geometry::Region;
use crate::layout::{relation_descriptor, LayoutSpec, SpatialRelation, TERRAIN_ANCHORS};
use crate::llm::LlmBackend;
use crate::plan::{execute_on, validate_plan, Action, ActionPlan, Executor, PlanDiagnostic, RunReport};
use crate::registry::{Capability, ParamValue, ParamValues, PluginDescriptor, Registry};
use crate::retrieval::{retrieve, Embedder, EmbeddingIndex, EntryKind, RetrievalHit};
use crate::rng::derive_seed;
use crate::scene::SceneGraph;
use crate::terrain::{TerrainParams, Valley};
use crate::layout::resolve_relation;

/// Minimum spacing for objects that have no relation.
pub const DEFAULT_MIN_SEPARATION: f64 = 2.0;
const DEFAULT_TERRAIN_RESOLUTION: usize = 65;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerOptions {
    pub seed: u64,
    pub toggles: PromptToggles,
    pub api_threshold: f64,
    pub domain: [f64; 2],
}

impl Default for PlannerOptions {
    fn default() -> Self {
        PlannerOptions {
            seed: 0,
            toggles: PromptToggles::default(),
            api_threshold: crate::retrieval::DEFAULT_API_THRESHOLD,
            domain: [100.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRecord {
    pub object: String,
    pub hit: RetrievalHit,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlannerTrace {
    pub query: String,
    pub model: String,
    pub prompt_components: String,
    pub end_flag: bool,
    pub objects: Vec<ObjectPlan>,
    pub relations: Vec<SpatialRelation>,
    pub retrievals: Vec<RetrievalRecord>,
    pub attempts: Vec<AttemptRecord>,
    pub assumptions: Vec<String>,
    pub clarifications: Vec<ClarificationRequest>,
    pub diagnostics: Vec<PlanDiagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub run: RunReport,
    pub planner: PlannerTrace,
}

impl PipelineReport {
    pub fn to_json(&self) -> String {
        canonical::to_canonical_string(self).expect("report serializes")
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub scene: SceneGraph,
    pub plan: ActionPlan,
    pub report: PipelineReport,
}

pub struct Planner<'a> {
    registry: &'a Registry,
    llm: &'a dyn LlmBackend,
    embedder: &'a dyn Embedder,
    index: EmbeddingIndex,
    options: PlannerOptions,
}

impl<'a> Planner<'a> {
    pub fn new(
        registry: &'a Registry,
        llm: &'a dyn LlmBackend,
        embedder: &'a dyn Embedder,
        options: PlannerOptions,
    ) -> Result<Self, PipelineError> {
        let index = EmbeddingIndex::build(registry, embedder)
            .map_err(|e| PipelineError::new(Stage::Retrieval, format!("cannot index registry: {e}")))?;
        Ok(Planner { registry, llm, embedder, index, options })
    }

    pub fn options(&self) -> &PlannerOptions {
        &self.options
    }

    pub fn registry(&self) -> &Registry {
        self.registry
    }

    /// Plans and executes `query` on an empty scene.
    pub fn generate(&self, query: &str, handler: &mut dyn ClarificationHandler) -> Result<PipelineOutcome, PipelineError> {
        let seed = self.options.seed;
        Run::new(self, query, SceneGraph::new(seed), String::new(), seed, handler).run()
    }

    /// Plans `query` against an existing scene and applies it. Existing
    /// instances are never modified; new action ids get an `e<k>.` prefix.
    pub fn edit(
        &self,
        scene: &SceneGraph,
        query: &str,
        handler: &mut dyn ClarificationHandler,
    ) -> Result<PipelineOutcome, PipelineError> {
        let k = (1u64..)
            .find(|k| {
                let p = format!("e{k}.");
                !scene.instances.iter().any(|i| i.id.starts_with(&p))
                    && !scene.metadata.keys().any(|m| m.contains(&format!(":{p}")))
            })
            .expect("unbounded search");
        let seed = derive_seed(scene.seed, "edit", k);
        Run::new(self, query, scene.clone(), format!("e{k}."), seed, handler).run()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Task {
    Decompose,
    Terrain(usize),
    Object(usize),
    Relations,
    Place,
    Execute,
}

struct Source {
    id: String,
    layout: Option<String>,
}

struct Run<'p, 'a> {
    p: &'p Planner<'a>,
    agents: Agents<'a>,
    handler: &'p mut dyn ClarificationHandler,
    query: String,
    base: SceneGraph,
    prefix: String,
    plan: ActionPlan,
    exec: Executor<'a>,
    trace: PlannerTrace,
    pending: VecDeque<Task>,
    objects: Vec<ObjectPlan>,
    sources: Vec<Option<Source>>,
    relations: Vec<SpatialRelation>,
    domain: Region,
    outcome: Option<(SceneGraph, RunReport)>,
}

fn slug(name: &str) -> String {
    let s: String = name
        .trim()
        .to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    if s.is_empty() {
        "object".into()
    } else {
        s
    }
}

fn is_terrain_object(o: &ObjectPlan) -> bool {
    TERRAIN_ANCHORS.contains(&o.name.to_lowercase().as_str())
}

fn placeable(c: Capability) -> bool {
    !matches!(c, Capability::Terrain | Capability::Weather | Capability::Snow | Capability::Materials)
}

fn existing_objects(scene: &SceneGraph) -> Vec<String> {
    let set: BTreeSet<String> =
        scene.instances.iter().filter_map(|i| i.object_name().map(str::to_string)).collect();
    set.into_iter().collect()
}

fn domain_of(scene: &SceneGraph, fallback: [f64; 2]) -> Region {
    match &scene.terrain {
        Some(hf) => Region::rect([0.0, 0.0], hf.size()),
        None => Region::rect([0.0, 0.0], fallback),
    }
}

/// Maps a terrain plugin assignment onto generator parameters. `size`
/// sets both axes; a positive `valley_depth` carves a valley across the
/// middle of the field along x.
pub fn terrain_params(values: &ParamValues, seed: u64, domain: [f64; 2]) -> TerrainParams {
    let f = |k: &str| values.get(k).and_then(ParamValue::as_f64);
    let size_x = f("size_x").or(f("size")).unwrap_or(domain[0]);
    let size_y = f("size_y").or(f("size")).unwrap_or(domain[1]);
    let valley = f("valley_depth").filter(|d| *d > 0.0).map(|depth| Valley {
        path: vec![[0.0, size_y * 0.5], [size_x, size_y * 0.5]],
        depth,
        width: f("valley_width").unwrap_or(size_x * 0.1),
    });
    TerrainParams {
        size_x,
        size_y,
        resolution: f("resolution").map_or(DEFAULT_TERRAIN_RESOLUTION, |r| r as usize),
        base_elevation: f("base_elevation").unwrap_or(0.0),
        elevation_range: f("elevation_range").unwrap_or(0.0),
        slope: f("slope").unwrap_or(0.0),
        slope_direction: f("slope_direction").unwrap_or(0.0),
        roughness: f("roughness").unwrap_or(0.0),
        octaves: f("octaves").map_or(5, |o| o as u32),
        valley,
        seed: derive_seed(seed, "terrain", 0),
        materials: values.get("material").and_then(ParamValue::as_str).map(|m| vec![m.to_string()]).unwrap_or_default(),
    }
}

impl<'p, 'a> Run<'p, 'a> {
    fn new(
        p: &'p Planner<'a>,
        query: &str,
        base: SceneGraph,
        prefix: String,
        seed: u64,
        handler: &'p mut dyn ClarificationHandler,
    ) -> Self {
        let domain = domain_of(&base, p.options.domain);
        Run {
            p,
            agents: Agents { llm: p.llm, toggles: p.options.toggles },
            handler,
            query: query.trim().to_string(),
            exec: Executor::new(base.clone(), p.registry),
            base,
            prefix,
            plan: ActionPlan::new(seed),
            trace: PlannerTrace {
                query: query.to_string(),
                model: p.llm.model().to_string(),
                prompt_components: p.options.toggles.label(),
                ..PlannerTrace::default()
            },
            pending: VecDeque::from([Task::Decompose]),
            objects: Vec::new(),
            sources: Vec::new(),
            relations: Vec::new(),
            domain,
            outcome: None,
        }
    }

    fn run(mut self) -> Result<PipelineOutcome, PipelineError> {
        if self.query.is_empty() {
            return Err(PipelineError::new(Stage::Input, "query is empty"));
        }
        while !self.trace.end_flag {
            let task = self.pending.pop_front().expect("pending tasks remain until end_flag");
            if let Err(mut e) = self.step(task) {
                e.attempts = self.trace.attempts.clone();
                e.partial_plan = Some(self.plan.clone());
                return Err(e);
            }
            self.trace.end_flag = self.pending.is_empty();
        }
        let (scene, run) = self.outcome.take().expect("execute task ran");
        Ok(PipelineOutcome { scene, plan: self.plan, report: PipelineReport { run, planner: self.trace } })
    }

    fn step(&mut self, task: Task) -> Result<(), PipelineError> {
        match task {
            Task::Decompose => self.decompose(),
            Task::Terrain(i) => self.terrain(i),
            Task::Object(i) => self.object(i),
            Task::Relations => self.extract_relations(),
            Task::Place => self.place(),
            Task::Execute => {
                self.execute();
                Ok(())
            }
        }
    }

    fn push(&mut self, action: Action) {
        self.exec.apply(&action);
        self.plan.actions.push(action);
    }

    fn unique_id(&self, name: &str) -> String {
        let base = format!("{}{}", self.prefix, slug(name));
        let taken = |id: &str| {
            self.plan.actions.iter().any(|a| a.id() == id || a.id() == format!("{id}.layout"))
        };
        if !taken(&base) {
            return base;
        }
        (2..).map(|n| format!("{base}_{n}")).find(|id| !taken(id)).expect("unbounded search")
    }

    fn decompose(&mut self) -> Result<(), PipelineError> {
        let existing = existing_objects(&self.base);
        let mut query = self.query.clone();
        let objects = loop {
            match self.agents.decompose(&query, &existing, self.p.registry, &mut self.trace.attempts)? {
                Decomposition::Objects(o) => break o,
                Decomposition::Clarify(req) => {
                    self.trace.clarifications.push(req.clone());
                    let answer = self.handler.clarify(&req).and_then(|a| a.get("details").cloned());
                    match answer.filter(|a| !a.trim().is_empty()) {
                        Some(a) if query == self.query => query = format!("{query}\nAdditional details: {}", a.trim()),
                        _ => {
                            return Err(PipelineError::new(
                                Stage::Clarification,
                                format!("clarification needed: {}", req.questions.join(" ")),
                            ))
                        }
                    }
                }
            }
        };
        self.objects = objects;
        self.sources = self.objects.iter().map(|_| None).collect();
        self.trace.objects = self.objects.clone();
        let terrain = self.objects.iter().position(is_terrain_object);
        if let Some(t) = terrain {
            self.pending.push_back(Task::Terrain(t));
        }
        for i in (0..self.objects.len()).filter(|i| Some(*i) != terrain) {
            self.pending.push_back(Task::Object(i));
        }
        self.pending.extend([Task::Relations, Task::Place, Task::Execute]);
        Ok(())
    }

    /// Fills required parameters the model left out, asking the handler
    /// first and falling back to feasible values.
    fn clarify_missing(&mut self, desc: &PluginDescriptor, object: &str, values: &mut ParamValues) {
        let missing: Vec<_> = desc.missing_required(values).into_iter().cloned().collect();
        if missing.is_empty() {
            return;
        }
        let req = ClarificationRequest {
            subject: object.to_string(),
            plugin: Some(desc.name.clone()),
            missing: missing.iter().map(|p| p.name.clone()).collect(),
            questions: missing
                .iter()
                .map(|p| {
                    let mut q = format!("Which {} should `{object}` use? {}", p.name, p.description);
                    if !p.options.is_empty() {
                        q.push_str(&format!(" Options: {}.", p.options.join(", ")));
                    }
                    q
                })
                .collect(),
        };
        self.trace.clarifications.push(req.clone());
        let answers = self.handler.clarify(&req).unwrap_or_default();
        for spec in &missing {
            let value = match answers.get(&spec.name).map(|a| spec.check_value(&parse_answer(spec, a))) {
                Some(Ok(v)) => v,
                Some(Err(v)) => {
                    let fallback = spec.feasible_value();
                    self.trace
                        .assumptions
                        .push(format!("answer for {object}.{} rejected ({v}); using {fallback}", spec.name));
                    fallback
                }
                None => {
                    let fallback = spec.feasible_value();
                    self.trace.assumptions.push(format!("assumed {object}.{} = {fallback}", spec.name));
                    fallback
                }
            };
            values.insert(spec.name.clone(), value);
        }
    }

    fn terrain(&mut self, i: usize) -> Result<(), PipelineError> {
        let object = self.objects[i].clone();
        let domain = self.p.options.domain;
        let desc = self.p.registry.descriptors.values().find(|d| d.capability == Capability::Terrain);
        let params = match desc {
            Some(desc) => {
                let mut values = self.agents.generate_hyperparams(desc, &object, &mut self.trace.attempts)?;
                self.clarify_missing(desc, &object.name, &mut values);
                terrain_params(&desc.fill_defaults(&values).values, self.plan.seed, domain)
            }
            None => {
                self.trace.assumptions.push("no terrain plugin registered; using flat ground".into());
                let mut t = TerrainParams::flat(domain[0], DEFAULT_TERRAIN_RESOLUTION, 0.0);
                t.size_y = domain[1];
                t
            }
        };
        let id = self.unique_id(&object.name);
        self.sources[i] = Some(Source { id: id.clone(), layout: None });
        self.push(Action::GenerateTerrain { id, params });
        self.domain = domain_of(self.exec.scene(), domain);
        Ok(())
    }

    fn object(&mut self, i: usize) -> Result<(), PipelineError> {
        let object = self.objects[i].clone();
        let id = self.unique_id(&object.name);
        let query = object.query_text();
        let seed = derive_seed(self.plan.seed, "retrieval", i as u64);
        let hit = if object.update {
            let q = self.p.embedder.embed_text(&query).map_err(|e| PipelineError::new(Stage::Retrieval, e.to_string()))?;
            let best = self
                .p
                .index
                .top_k(&q, 1, Some(EntryKind::Api))
                .map_err(|e| PipelineError::new(Stage::Retrieval, format!("{}: {e}", object.name)))?;
            RetrievalHit::Api { name: best[0].key.clone(), score: best[0].score }
        } else {
            retrieve(&self.p.index, &query, self.p.embedder, seed, self.p.options.api_threshold)
                .map_err(|e| PipelineError::new(Stage::Retrieval, format!("{}: {e}", object.name)))?
        };
        self.trace.retrievals.push(RetrievalRecord { object: object.name.clone(), hit: hit.clone() });

        match hit {
            RetrievalHit::Api { name, .. } => {
                let desc = self.p.registry.descriptor(&name).expect("indexed descriptors are registered").clone();
                let mut values = self.agents.generate_hyperparams(&desc, &object, &mut self.trace.attempts)?;
                if object.update {
                    self.sources[i] = Some(Source { id: id.clone(), layout: None });
                    self.push(Action::InvokeApi {
                        id,
                        object: object.name.clone(),
                        plugin: desc.name.clone(),
                        params: values,
                        count: 1,
                        transform: None,
                        layout: None,
                        update_existing: true,
                    });
                    return Ok(());
                }
                self.clarify_missing(&desc, &object.name, &mut values);
                let params = desc.fill_defaults(&values).values;
                let layout = placeable(desc.capability).then(|| format!("{id}.layout"));
                let count = if layout.is_some() { object.count.unwrap_or(1) } else { 1 };
                self.sources[i] = Some(Source { id: id.clone(), layout: layout.clone() });
                self.push(Action::InvokeApi {
                    id,
                    object: object.name.clone(),
                    plugin: desc.name.clone(),
                    params,
                    count,
                    transform: None,
                    layout,
                    update_existing: false,
                });
            }
            RetrievalHit::Asset { id: asset, .. } => {
                let layout = Some(format!("{id}.layout"));
                self.sources[i] = Some(Source { id: id.clone(), layout: layout.clone() });
                self.push(Action::ImportAsset { id, object: object.name.clone(), asset, transform: None, layout });
            }
        }
        Ok(())
    }

    fn placeable_objects(&self) -> Vec<usize> {
        (0..self.objects.len())
            .filter(|&i| self.sources[i].as_ref().is_some_and(|s| s.layout.is_some()))
            .collect()
    }

    fn extract_relations(&mut self) -> Result<(), PipelineError> {
        let placeable = self.placeable_objects();
        if placeable.is_empty() {
            return Ok(());
        }
        let subjects: Vec<ObjectPlan> = placeable.iter().map(|&i| self.objects[i].clone()).collect();
        let mut anchors: BTreeSet<String> = TERRAIN_ANCHORS.iter().map(|s| s.to_string()).collect();
        anchors.extend(self.objects.iter().filter(|o| !o.update).map(|o| o.name.clone()));
        anchors.extend(existing_objects(&self.base));
        anchors.extend(self.base.regions.keys().cloned());
        anchors.extend(self.base.paths.keys().cloned());
        let relations = self.agents.extract_relations(&self.query, &subjects, &anchors, &mut self.trace.attempts)?;
        let mut seen = BTreeSet::new();
        for r in &relations {
            if !seen.insert(r.subject.clone()) {
                self.trace.assumptions.push(format!("ignored extra {} relation for {}", r.kind.name(), r.subject));
            }
        }
        self.trace.relations = relations.clone();
        self.relations = relations;
        Ok(())
    }

    fn relation_for(&self, name: &str) -> Option<&SpatialRelation> {
        self.relations.iter().find(|r| r.subject == name)
    }

    /// Placement order: anchors before the objects that depend on them,
    /// otherwise object order. Cycles are broken in object order.
    fn placement_order(&mut self) -> Vec<usize> {
        let mut remaining = self.placeable_objects();
        let mut order = Vec::new();
        while !remaining.is_empty() {
            let ready: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| {
                    let Some(rel) = self.relation_for(&self.objects[i].name) else { return true };
                    !remaining.iter().any(|&j| j != i && self.objects[j].name == rel.anchor)
                })
                .collect();
            if ready.is_empty() {
                self.trace.assumptions.push("relations form a cycle; placing in listed order".into());
                order.append(&mut remaining);
                break;
            }
            remaining.retain(|i| !ready.contains(i));
            order.extend(ready);
        }
        order
    }

    fn place(&mut self) -> Result<(), PipelineError> {
        for i in self.placement_order() {
            let object = self.objects[i].clone();
            let src = self.sources[i].as_ref().expect("placeable objects have sources");
            let (source_id, layout_id) = (src.id.clone(), src.layout.clone().expect("placeable"));
            let seed = derive_seed(self.plan.seed, "layout", i as u64);
            let on_terrain = self.exec.scene().terrain.is_some();
            let default = LayoutSpec::Scatter {
                region: self.domain.clone(),
                count: object.count.unwrap_or(1),
                min_separation: DEFAULT_MIN_SEPARATION,
                seed,
                exclusions: vec![],
            };
            let (layout, project) = match self.relation_for(&object.name).cloned() {
                None => (default, on_terrain),
                Some(mut rel) => {
                    if let Some(c) = object.count {
                        if relation_descriptor(rel.kind).param("count").is_some() {
                            rel.params.entry("count".into()).or_insert(ParamValue::Int(c as i64));
                        }
                    }
                    match resolve_relation(&rel, self.exec.scene(), &self.domain, seed) {
                        Ok(r) => (r.spec, r.project_to_terrain),
                        Err(e) => {
                            self.trace.assumptions.push(format!(
                                "{} relation for {} not resolvable ({e}); scattering instead",
                                rel.kind.name(),
                                object.name
                            ));
                            (default, on_terrain)
                        }
                    }
                }
            };
            self.push(Action::PlaceLayout { id: layout_id, object: source_id, layout, project_to_terrain: project });
        }
        Ok(())
    }

    fn execute(&mut self) {
        self.trace.diagnostics = validate_plan(&self.plan, self.p.registry, Some(&self.base));
        let mut scene = self.base.clone();
        let report = execute_on(&mut scene, &self.plan, self.p.registry);
        self.outcome = Some((scene, report));
    }
}
