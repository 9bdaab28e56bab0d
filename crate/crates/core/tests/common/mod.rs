#![allow(dead_code)]

use std::path::{Path, PathBuf};

use scenesmith_core::planner::{PipelineConfig, PlannerOptions};
use scenesmith_core::Registry;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().expect("repository root")
}

pub fn sample_registry() -> Registry {
    Registry::load_dir(&repo_root().join("registry")).expect("sample registry loads")
}

pub fn replay_config() -> PipelineConfig {
    PipelineConfig::load(&repo_root().join("fixtures/replay.json")).expect("replay config loads")
}

pub fn options(seed: u64) -> PlannerOptions {
    PlannerOptions { seed, ..PlannerOptions::default() }
}

/// `(executed, correct)` per case of `fixtures/eval/smoke.json`, tallied by
/// reading the scripts and checks by hand.
pub const SMOKE_TALLY: (usize, usize, usize) = (10, 8, 7);
