use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "scenesmith", version, about = "Plan and build 3D scenes from text")]
pub struct Cli {
    /// Print failures as one JSON object on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,

    /// Base URL of a running `scenesmith serve`, for the `session` commands.
    #[arg(long, global = true, env = "SCENESMITH_SERVER")]
    pub server: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scene from a description.
    Generate(GenerateArgs),
    /// Apply an instruction to an existing scene.
    Edit(EditArgs),
    /// Evaluation datasets.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Plugin descriptors and the asset catalog.
    Registry {
        #[command(subcommand)]
        command: RegistryCommand,
    },
    /// Run the HTTP session service.
    Serve(ServeArgs),
    /// Convert a scene file.
    Export(ExportArgs),
    /// Drive a running service (needs `--server`).
    Session {
        #[command(subcommand)]
        command: SessionCommand,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendChoice {
    Replay,
    ScriptedMock,
    Http,
}

/// Where the pipeline's model, registry and seed come from. A `--config`
/// file supplies defaults that the other flags override.
#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Pipeline config JSON (backend, registry, seed, embedder).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendChoice>,
    /// Replay source, or recording target with `--record`.
    #[arg(long)]
    pub cassette: Option<PathBuf>,
    /// Record live responses into `--cassette`.
    #[arg(long)]
    pub record: bool,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Prompt components to include, e.g. `R,T,D,F`.
    #[arg(long)]
    pub components: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub prompt: String,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Output directory for scene.json, plan.json, scene.obj and report.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub prompt: String,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Output directory; defaults to the scene's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Never ask; fill missing details with defaults.
    #[arg(long)]
    pub no_input: bool,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Score every case of a dataset.
    Run(EvalRunArgs),
}

#[derive(Debug, Args)]
pub struct EvalRunArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Report JSON path; a markdown summary is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum RegistryCommand {
    /// Check every descriptor and the asset catalog.
    Validate { dir: PathBuf },
    /// Embed every asset and API description.
    Index {
        dir: PathBuf,
        /// Output JSON-lines file; defaults to `<dir>/index.jsonl`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Embedding dimension of the built-in embedder.
        #[arg(long, default_value_t = scenesmith_core::retrieval::DEFAULT_DIM)]
        dim: usize,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Directory of static files (a built studio) served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Obj,
    Json,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long, value_enum, default_value = "obj")]
    pub format: ExportFormat,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SessionCommand {
    /// Create a session and print its id.
    New {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        components: Option<String>,
    },
    List,
    Show { id: String },
    /// Send an instruction; with `--wait`, poll until the job settles.
    Instruct {
        id: String,
        text: String,
        #[arg(long)]
        wait: bool,
    },
    /// Answer a pending clarification with `name=value` pairs.
    Clarify { id: String, answers: Vec<String> },
    Clarification { id: String },
    Job { id: String },
    Scene { id: String },
    Plan { id: String },
    Report { id: String },
}
