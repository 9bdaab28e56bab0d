use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use scenesmith_core::eval::{run_suite, Dataset};
use scenesmith_core::llm::{BackendConfig, BackendKind};
use scenesmith_core::planner::{
    Answers, ClarificationHandler, ClarificationRequest, NonInteractive, PipelineConfig, PipelineOutcome, Planner,
    PromptToggles,
};
use scenesmith_core::retrieval::{EmbedderConfig, MockEmbedder, DEFAULT_API_THRESHOLD};
use scenesmith_core::{EmbeddingIndex, Registry, SceneGraph};
use scenesmith_service::{AppState, ServiceConfig};

use crate::args::{BackendChoice, EditArgs, EvalRunArgs, ExportArgs, ExportFormat, GenerateArgs, PipelineArgs, ServeArgs};
use crate::error::CliError;

/// Merges `--config` with the individual flags; flags win.
pub fn resolve(args: &PipelineArgs) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => {
            let registry = args.registry.clone().ok_or_else(|| CliError::Usage("--registry or --config is required".into()))?;
            let kind = args.backend.ok_or_else(|| CliError::Usage("--backend or --config is required".into()))?;
            let mut backend = BackendConfig::replay(PathBuf::new());
            backend.cassette = None;
            backend.kind = backend_kind(kind);
            PipelineConfig {
                backend,
                registry,
                seed: 0,
                toggles: PromptToggles::default(),
                embedder: EmbedderConfig::default(),
                api_threshold: DEFAULT_API_THRESHOLD,
                domain: [100.0, 100.0],
            }
        }
    };
    if let Some(r) = &args.registry {
        cfg.registry = r.clone();
    }
    if let Some(k) = args.backend {
        cfg.backend.kind = backend_kind(k);
    }
    if let Some(c) = &args.cassette {
        cfg.backend.cassette = Some(c.clone());
    }
    if args.record {
        cfg.backend.record = true;
    }
    if let Some(m) = &args.model {
        cfg.backend.model = m.clone();
    }
    if let Some(e) = &args.endpoint {
        cfg.backend.endpoint = Some(e.clone());
    }
    if let Some(k) = &args.api_key_env {
        cfg.backend.api_key_env = Some(k.clone());
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(c) = &args.components {
        cfg.toggles = PromptToggles::from_components(c).map_err(CliError::Usage)?;
    }
    Ok(cfg)
}

fn backend_kind(c: BackendChoice) -> BackendKind {
    match c {
        BackendChoice::Replay => BackendKind::Replay,
        BackendChoice::ScriptedMock => BackendKind::ScriptedMock,
        BackendChoice::Http => BackendKind::Http,
    }
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
pub fn emit(text: &str) -> Result<(), CliError> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io("<stdout>")(e)),
        _ => Ok(()),
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(CliError::io(path))
}

/// Writes the four run artifacts, then fails if any action did not run.
fn write_outputs(dir: &Path, out: &PipelineOutcome) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    write(&dir.join("scene.json"), &out.scene.to_json())?;
    write(&dir.join("plan.json"), &out.plan.to_json())?;
    write(&dir.join("scene.obj"), &out.scene.to_obj())?;
    write(&dir.join("report.json"), &out.report.to_json())?;
    let run = &out.report.run;
    println!(
        "{} instances, {}/{} actions executed -> {}",
        out.scene.instances.len(),
        run.executed_count,
        run.total,
        dir.display()
    );
    for a in &out.report.planner.assumptions {
        eprintln!("assumed: {a}");
    }
    if run.all_executed() {
        Ok(())
    } else {
        let ids: Vec<&str> = run.failures().map(|f| f.id.as_str()).collect();
        Err(CliError::ActionsFailed { failed: ids.len(), total: run.total, ids: ids.join(", ") })
    }
}

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let cfg = resolve(&args.pipeline)?;
    let registry = Registry::load_dir(&cfg.registry)?;
    let llm = cfg.backend.build()?;
    let embedder = cfg.embedder.build();
    let planner = Planner::new(&registry, llm.as_ref(), embedder.as_ref(), cfg.options())?;
    let out = planner.generate(&args.prompt, &mut NonInteractive)?;
    write_outputs(&args.out, &out)
}

/// Asks on stderr and reads one answer per missing name from stdin. An
/// empty line or end of input leaves the gap to the defaults.
struct StdinHandler;

impl ClarificationHandler for StdinHandler {
    fn clarify(&mut self, request: &ClarificationRequest) -> Option<Answers> {
        let stdin = std::io::stdin();
        let mut err = std::io::stderr();
        let _ = writeln!(err, "More detail needed for `{}`:", request.subject);
        for q in &request.questions {
            let _ = writeln!(err, "  {q}");
        }
        let mut answers = Answers::new();
        for name in &request.missing {
            let _ = write!(err, "{name}: ");
            let _ = err.flush();
            let mut line = String::new();
            if stdin.lock().read_line(&mut line).unwrap_or(0) == 0 {
                break;
            }
            let line = line.trim();
            if !line.is_empty() {
                answers.insert(name.clone(), line.to_string());
            }
        }
        (!answers.is_empty()).then_some(answers)
    }
}

pub fn edit(args: &EditArgs) -> Result<(), CliError> {
    let cfg = resolve(&args.pipeline)?;
    let scene = SceneGraph::load(&args.scene)?;
    let registry = Registry::load_dir(&cfg.registry)?;
    let llm = cfg.backend.build()?;
    let embedder = cfg.embedder.build();
    let planner = Planner::new(&registry, llm.as_ref(), embedder.as_ref(), cfg.options())?;
    let out = if args.no_input {
        planner.edit(&scene, &args.prompt, &mut NonInteractive)?
    } else {
        planner.edit(&scene, &args.prompt, &mut StdinHandler)?
    };
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => args.scene.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    write_outputs(&dir, &out)
}

pub fn eval_run(args: &EvalRunArgs) -> Result<(), CliError> {
    let cfg = resolve(&args.pipeline)?;
    let dataset = Dataset::load(&args.dataset)?;
    let registry = Registry::load_dir(&cfg.registry)?;
    let embedder = cfg.embedder.build();
    let report = run_suite(&dataset, &registry, embedder.as_ref(), cfg.options(), &cfg.backend)?;
    let md = report.to_markdown();
    match &args.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
            }
            write(path, &report.to_json())?;
            write(&path.with_extension("md"), &md)?;
            let m = &report.metrics;
            println!(
                "{}: {} cases, ER@1 {:.2}, SR@1 {:.2} -> {}",
                report.dataset,
                m.total,
                m.er_at_1,
                m.sr_at_1,
                path.display()
            );
        }
        None => emit(&report.to_json())?,
    }
    Ok(())
}

pub fn registry_validate(dir: &Path) -> Result<(), CliError> {
    let reg = Registry::load_dir(dir)?;
    println!("{}: {} plugins, {} assets", dir.display(), reg.descriptors.len(), reg.assets.len());
    Ok(())
}

pub fn registry_index(dir: &Path, out: Option<&Path>, dim: usize) -> Result<(), CliError> {
    let reg = Registry::load_dir(dir)?;
    let index = EmbeddingIndex::build(&reg, &MockEmbedder::new(dim))
        .map_err(|e| CliError::Usage(format!("cannot index {}: {e}", dir.display())))?;
    let mut body = String::new();
    for e in index.entries() {
        let line = json!({"key": e.key, "kind": e.kind, "embedding": e.embedding});
        body.push_str(&line.to_string());
        body.push('\n');
    }
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| dir.join("index.jsonl"));
    write(&path, &body)?;
    println!("{} entries of dimension {dim} -> {}", index.len(), path.display());
    Ok(())
}

pub fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let cfg = resolve(&args.pipeline)?;
    let mut service = ServiceConfig::from_pipeline(&cfg)?;
    service.static_dir = args.static_dir.clone();
    let state = AppState::new(service)?;
    let addr = format!("{}:{}", args.bind, args.port);
    let rt = tokio::runtime::Runtime::new().map_err(CliError::io("tokio runtime"))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(CliError::io(&addr))?;
        eprintln!("serving on http://{}", listener.local_addr().map_err(CliError::io(&addr))?);
        scenesmith_service::serve(listener, state).await.map_err(CliError::io(&addr))
    })
}

pub fn export(args: &ExportArgs) -> Result<(), CliError> {
    let scene = SceneGraph::load(&args.scene)?;
    let text = match args.format {
        ExportFormat::Obj => scene.to_obj(),
        ExportFormat::Json => scene.to_json(),
    };
    match &args.out {
        Some(p) => write(p, &text),
        None => emit(&text),
    }
}
