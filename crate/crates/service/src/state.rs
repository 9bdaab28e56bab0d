use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use scenesmith_core::llm::BackendConfig;
use scenesmith_core::planner::{
    Answers, ClarificationHandler, ClarificationRequest, PipelineConfig, PipelineReport, Planner, PlannerOptions,
};
use scenesmith_core::retrieval::Embedder;
use scenesmith_core::{ActionPlan, Registry, SceneGraph};

use crate::ServiceError;

/// Environment variable naming the snapshot directory.
pub const DATA_DIR_ENV: &str = "SCENESMITH_DATA_DIR";

pub const SNAPSHOT_SCHEMA: &str = "session/1";

pub struct ServiceConfig {
    pub registry: Registry,
    pub embedder: Box<dyn Embedder>,
    /// Backend for sessions created without an override.
    pub backend: BackendConfig,
    pub options: PlannerOptions,
    /// Snapshots go to `<data_dir>/sessions/<id>.json` when set.
    pub data_dir: Option<PathBuf>,
    /// Static files (a built studio) served under `/`.
    pub static_dir: Option<PathBuf>,
    /// How long a paused run waits for answers before falling back to
    /// defaults.
    pub clarification_timeout: Duration,
}

impl ServiceConfig {
    pub fn from_pipeline(cfg: &PipelineConfig) -> Result<Self, ServiceError> {
        let registry = Registry::load_dir(&cfg.registry).map_err(|e| ServiceError::InvalidConfig(e.to_string()))?;
        Ok(ServiceConfig {
            registry,
            embedder: cfg.embedder.build(),
            backend: cfg.backend.clone(),
            options: cfg.options(),
            data_dir: std::env::var_os(DATA_DIR_ENV).map(PathBuf::from),
            static_dir: None,
            clarification_timeout: Duration::from_secs(30 * 60),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    AwaitingClarification,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub session: String,
    pub instruction: String,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clarification: Option<ClarificationRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub executed_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<usize>,
}

struct Pending {
    request: ClarificationRequest,
    reply: mpsc::Sender<Answers>,
}

pub(crate) struct Session {
    id: String,
    scene: SceneGraph,
    plans: Vec<ActionPlan>,
    report: Option<PipelineReport>,
    backend: BackendConfig,
    options: PlannerOptions,
    active_job: Option<String>,
    pending: Option<Pending>,
}

/// Persisted form of a session. Jobs and pending questions are not kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSnapshot {
    pub schema: String,
    pub id: String,
    pub scene: SceneGraph,
    pub plans: Vec<ActionPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PipelineReport>,
    pub backend: BackendConfig,
    pub options: PlannerOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub busy: bool,
    pub instance_count: usize,
    pub has_terrain: bool,
    pub plan_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_job: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_clarification: Option<ClarificationRequest>,
}

impl Session {
    fn new(id: String, backend: BackendConfig, options: PlannerOptions) -> Self {
        Session {
            id,
            scene: SceneGraph::new(options.seed),
            plans: Vec::new(),
            report: None,
            backend,
            options,
            active_job: None,
            pending: None,
        }
    }

    fn summary(&self) -> SessionSummary {
        SessionSummary {
            id: self.id.clone(),
            busy: self.active_job.is_some(),
            instance_count: self.scene.instances.len(),
            has_terrain: self.scene.terrain.is_some(),
            plan_count: self.plans.len(),
            active_job: self.active_job.clone(),
            pending_clarification: self.pending.as_ref().map(|p| p.request.clone()),
        }
    }

    fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            schema: SNAPSHOT_SCHEMA.into(),
            id: self.id.clone(),
            scene: self.scene.clone(),
            plans: self.plans.clone(),
            report: self.report.clone(),
            backend: self.backend.clone(),
            options: self.options,
        }
    }

    fn from_snapshot(s: SessionSnapshot) -> Self {
        Session {
            id: s.id,
            scene: s.scene,
            plans: s.plans,
            report: s.report,
            backend: s.backend,
            options: s.options,
            active_job: None,
            pending: None,
        }
    }

    fn is_blank(&self) -> bool {
        self.scene.instances.is_empty() && self.scene.terrain.is_none()
    }
}

/// Per-session overrides accepted by `POST /sessions`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewSession {
    #[serde(default)]
    pub backend: Option<BackendConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Prompt components, e.g. `"R,T,D,F"`.
    #[serde(default)]
    pub components: Option<String>,
}

struct Inner {
    config: ServiceConfig,
    sessions: Mutex<BTreeMap<String, Arc<Mutex<Session>>>>,
    jobs: Mutex<BTreeMap<String, JobRecord>>,
    next_session: AtomicU64,
    next_job: AtomicU64,
}

/// Shared service state. Cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl AppState {
    /// Builds the state and restores any snapshots under the data dir.
    pub fn new(config: ServiceConfig) -> Result<Self, ServiceError> {
        let mut sessions = BTreeMap::new();
        let mut next = 1;
        if let Some(dir) = &config.data_dir {
            for snap in load_snapshots(&dir.join("sessions"))? {
                if let Some(n) = snap.id.strip_prefix("session-").and_then(|n| n.parse::<u64>().ok()) {
                    next = next.max(n + 1);
                }
                sessions.insert(snap.id.clone(), Arc::new(Mutex::new(Session::from_snapshot(snap))));
            }
        }
        Ok(AppState {
            inner: Arc::new(Inner {
                config,
                sessions: Mutex::new(sessions),
                jobs: Mutex::new(BTreeMap::new()),
                next_session: AtomicU64::new(next),
                next_job: AtomicU64::new(1),
            }),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        lock(&self.inner.sessions).get(id).cloned().ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    fn with_session<T>(&self, id: &str, f: impl FnOnce(&Session) -> T) -> Result<T, ServiceError> {
        let session = self.session(id)?;
        let guard = lock(&session);
        Ok(f(&guard))
    }

    pub fn create_session(&self, req: NewSession) -> Result<SessionSummary, ServiceError> {
        let mut options = self.inner.config.options;
        if let Some(seed) = req.seed {
            options.seed = seed;
        }
        if let Some(c) = &req.components {
            options.toggles = scenesmith_core::planner::PromptToggles::from_components(c)
                .map_err(|e| ServiceError::InvalidConfig(e.to_string()))?;
        }
        let backend = req.backend.unwrap_or_else(|| self.inner.config.backend.clone());
        // Surface a broken backend now rather than on the first instruction.
        backend.build().map_err(|e| ServiceError::InvalidConfig(e.to_string()))?;
        let id = format!("session-{}", self.inner.next_session.fetch_add(1, Ordering::SeqCst));
        let session = Session::new(id.clone(), backend, options);
        let summary = session.summary();
        self.persist(&session)?;
        lock(&self.inner.sessions).insert(id, Arc::new(Mutex::new(session)));
        Ok(summary)
    }

    pub fn list_sessions(&self) -> Vec<SessionSummary> {
        let sessions: Vec<_> = lock(&self.inner.sessions).values().cloned().collect();
        sessions.iter().map(|s| lock(s).summary()).collect()
    }

    pub fn summary(&self, id: &str) -> Result<SessionSummary, ServiceError> {
        self.with_session(id, Session::summary)
    }

    pub fn scene_json(&self, id: &str) -> Result<String, ServiceError> {
        self.with_session(id, |s| s.scene.to_json())
    }

    pub fn plan_json(&self, id: &str) -> Result<String, ServiceError> {
        let s = self.session(id)?;
        let s = lock(&s);
        s.plans.last().map(ActionPlan::to_json).ok_or(ServiceError::NotReady("plan"))
    }

    pub fn plans(&self, id: &str) -> Result<Vec<ActionPlan>, ServiceError> {
        self.with_session(id, |s| s.plans.clone())
    }

    pub fn report(&self, id: &str) -> Result<PipelineReport, ServiceError> {
        self.with_session(id, |s| s.report.clone())?.ok_or(ServiceError::NotReady("report"))
    }

    pub fn clarification(&self, id: &str) -> Result<ClarificationRequest, ServiceError> {
        let s = self.session(id)?;
        let s = lock(&s);
        s.pending.as_ref().map(|p| p.request.clone()).ok_or_else(|| ServiceError::NothingToClarify(id.to_string()))
    }

    pub fn job(&self, id: &str) -> Result<JobRecord, ServiceError> {
        lock(&self.inner.jobs).get(id).cloned().ok_or_else(|| ServiceError::UnknownJob(id.to_string()))
    }

    fn update_job(&self, id: &str, f: impl FnOnce(&mut JobRecord)) {
        if let Some(j) = lock(&self.inner.jobs).get_mut(id) {
            f(j);
        }
    }

    /// Starts a pipeline run on a blocking worker. The first instruction of
    /// a blank session generates; later ones edit the current scene.
    pub fn instruct(&self, id: &str, text: String) -> Result<JobRecord, ServiceError> {
        let session = self.session(id)?;
        let job_id = {
            let mut s = lock(&session);
            if s.active_job.is_some() {
                return Err(ServiceError::Busy(id.to_string()));
            }
            let job_id = format!("job-{}", self.inner.next_job.fetch_add(1, Ordering::SeqCst));
            s.active_job = Some(job_id.clone());
            job_id
        };
        let record = JobRecord {
            id: job_id.clone(),
            session: id.to_string(),
            instruction: text.clone(),
            status: JobStatus::Running,
            clarification: None,
            error: None,
            executed_count: None,
            total: None,
        };
        lock(&self.inner.jobs).insert(job_id.clone(), record.clone());
        let state = self.clone();
        tokio::task::spawn_blocking(move || state.run_job(&session, &job_id, &text));
        Ok(record)
    }

    fn run_job(&self, session: &Arc<Mutex<Session>>, job_id: &str, text: &str) {
        let (scene, blank, backend, options) = {
            let s = lock(session);
            (s.scene.clone(), s.is_blank(), s.backend.clone(), s.options)
        };
        let cfg = &self.inner.config;
        let result = backend.build().map_err(|e| e.to_string()).and_then(|llm| {
            let planner =
                Planner::new(&cfg.registry, llm.as_ref(), cfg.embedder.as_ref(), options).map_err(|e| e.to_string())?;
            let mut handler = ChannelHandler { state: self, session, job_id };
            let run = if blank { planner.generate(text, &mut handler) } else { planner.edit(&scene, text, &mut handler) };
            run.map_err(|e| e.to_string())
        });

        let mut s = lock(session);
        s.active_job = None;
        s.pending = None;
        match result {
            Ok(out) => {
                let (executed, total) = (out.report.run.executed_count, out.report.run.total);
                s.scene = out.scene;
                s.plans.push(out.plan);
                s.report = Some(out.report);
                let saved = self.persist(&s);
                drop(s);
                self.update_job(job_id, |j| {
                    j.clarification = None;
                    j.executed_count = Some(executed);
                    j.total = Some(total);
                    match saved {
                        Ok(()) => j.status = JobStatus::Succeeded,
                        Err(e) => {
                            j.status = JobStatus::Failed;
                            j.error = Some(e.to_string());
                        }
                    }
                });
            }
            Err(e) => {
                drop(s);
                tracing::warn!(job = job_id, error = %e, "pipeline run failed");
                self.update_job(job_id, |j| {
                    j.clarification = None;
                    j.status = JobStatus::Failed;
                    j.error = Some(e);
                });
            }
        }
    }

    /// Delivers answers to a paused run. Every name in the request's
    /// `missing` list must be answered.
    pub fn clarify(&self, id: &str, answers: Answers) -> Result<JobRecord, ServiceError> {
        let session = self.session(id)?;
        let mut s = lock(&session);
        let pending = s.pending.as_ref().ok_or_else(|| ServiceError::NothingToClarify(id.to_string()))?;
        let missing: Vec<String> =
            pending.request.missing.iter().filter(|k| !answers.contains_key(*k)).cloned().collect();
        if !missing.is_empty() {
            return Err(ServiceError::MissingAnswers(missing));
        }
        let pending = s.pending.take().expect("checked above");
        let job_id = s.active_job.clone().expect("a paused run is active");
        drop(s);
        self.update_job(&job_id, |j| {
            j.status = JobStatus::Running;
            j.clarification = None;
        });
        // The worker may have timed out already; its defaults then stand.
        let _ = pending.reply.send(answers);
        self.job(&job_id)
    }

    fn persist(&self, session: &Session) -> Result<(), ServiceError> {
        let Some(dir) = &self.inner.config.data_dir else { return Ok(()) };
        let dir = dir.join("sessions");
        let storage = |e: std::io::Error| ServiceError::Storage(e.to_string());
        std::fs::create_dir_all(&dir).map_err(storage)?;
        let text = scenesmith_core::canonical::to_canonical_string(&session.snapshot())
            .map_err(|e| ServiceError::Storage(e.to_string()))?;
        // Write then rename so a crash never leaves a torn snapshot.
        let tmp = dir.join(format!("{}.json.tmp", session.id));
        std::fs::write(&tmp, text).map_err(storage)?;
        std::fs::rename(&tmp, dir.join(format!("{}.json", session.id))).map_err(storage)
    }
}

fn load_snapshots(dir: &Path) -> Result<Vec<SessionSnapshot>, ServiceError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let storage = |e: std::io::Error| ServiceError::Storage(format!("{}: {e}", dir.display()));
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(storage)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| ServiceError::Storage(format!("{}: {e}", p.display())))?;
            let snap: SessionSnapshot =
                serde_json::from_str(&text).map_err(|e| ServiceError::Storage(format!("{}: {e}", p.display())))?;
            if snap.schema != SNAPSHOT_SCHEMA {
                return Err(ServiceError::Storage(format!("{}: unsupported schema `{}`", p.display(), snap.schema)));
            }
            Ok(snap)
        })
        .collect()
}

/// Parks the worker until `POST /clarify` answers or the timeout passes.
struct ChannelHandler<'a> {
    state: &'a AppState,
    session: &'a Arc<Mutex<Session>>,
    job_id: &'a str,
}

impl ClarificationHandler for ChannelHandler<'_> {
    fn clarify(&mut self, request: &ClarificationRequest) -> Option<Answers> {
        let (tx, rx) = mpsc::channel();
        lock(self.session).pending = Some(Pending { request: request.clone(), reply: tx });
        self.state.update_job(self.job_id, |j| {
            j.status = JobStatus::AwaitingClarification;
            j.clarification = Some(request.clone());
        });
        let answers = rx.recv_timeout(self.state.inner.config.clarification_timeout).ok();
        if answers.is_none() {
            lock(self.session).pending = None;
            self.state.update_job(self.job_id, |j| {
                j.status = JobStatus::Running;
                j.clarification = None;
            });
        }
        answers
    }
}
