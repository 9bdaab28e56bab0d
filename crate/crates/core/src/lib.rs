//! Headless procedural scene synthesis.
//!
//! Turns natural-language scene descriptions into deterministic, executable
//! action plans. The pipeline decomposes a request into objects, retrieves
//! static assets or documented generator APIs by embedding similarity,
//! synthesizes terrain, and places instances with five procedural layout
//! generators. An evaluation harness scores runs by executability and
//! success rate, and every language-model call goes through a boundary that
//! can record and replay transcripts.
//!
//! Module map:
//!
//! * [`geometry`], [`scene`], [`camera`]: scene graph, primitives, exporters.
//! * [`registry`]: plugin descriptors, parameter validation, asset catalog.
//! * [`retrieval`]: embeddings, exact cosine index, embedders.
//! * [`terrain`]: seeded heightfields and valley carving.
//! * [`layout`]: scatter / grid / linear / nested / area-fill generators and
//!   relation resolution.
//! * [`llm`]: chat backends, cassettes.
//! * [`planner`]: prompt templates and the staged pipeline.
//! * [`plan`]: the action vocabulary and its executor.
//! * [`eval`]: ER@1 / SR@1 metrics and the dataset harness.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod canonical;
pub mod eval;
pub mod geometry;
pub mod layout;
pub mod llm;
pub mod plan;
pub mod planner;
pub mod registry;
pub mod retrieval;
pub mod rng;
pub mod scene;
pub mod terrain;

pub use geometry::{Aabb, Region, Transform, Vec3};
pub use plan::{Action, ActionPlan, RunReport};
pub use registry::{ParamAssignment, ParamSpec, ParamValue, PluginDescriptor, Registry};
pub use retrieval::{Embedding, EmbeddingIndex};
pub use scene::{AssetInstance, SceneGraph};
pub use terrain::{Heightfield, TerrainParams};
