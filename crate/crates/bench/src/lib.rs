//! Shared inputs for the benchmarks.

use std::path::PathBuf;

use scenesmith_core::layout::LayoutSpec;
use scenesmith_core::planner::{ConfigError, PipelineConfig};
use scenesmith_core::{Region, TerrainParams};

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// The checked-in replay configuration for the pine forest run.
pub fn replay_config() -> Result<PipelineConfig, ConfigError> {
    PipelineConfig::load(&workspace_root().join("fixtures/replay.json"))
}

pub fn forest_scatter(count: usize) -> LayoutSpec {
    LayoutSpec::Scatter {
        region: Region::rect([0.0, 0.0], [100.0, 100.0]),
        count,
        min_separation: 2.0,
        seed: 42,
        exclusions: vec![Region::disc([50.0, 50.0], 15.0)],
    }
}

pub fn rolling_hills(resolution: usize) -> TerrainParams {
    TerrainParams {
        size_x: 100.0,
        size_y: 100.0,
        resolution,
        base_elevation: 0.0,
        elevation_range: 12.0,
        slope: 0.05,
        slope_direction: 30.0,
        roughness: 0.6,
        octaves: 5,
        valley: None,
        seed: 7,
        materials: Vec::new(),
    }
}
