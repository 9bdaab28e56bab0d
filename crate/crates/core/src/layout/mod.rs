//! Procedural layout generators and relation-driven placement.
//!
//! Every generator is a pure function of its [`LayoutSpec`] (seeds live in
//! each spec), so repeated calls produce identical placements.

mod generators;
mod relation;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generators::{area_fill, grid, linear, nested, polyline_length, scatter, simplify_polyline, MAX_NESTING_DEPTH, SCATTER_ATTEMPTS_PER_POINT};
pub use relation::{relation_descriptor, resolve_relation, Anchor, RelationKind, ResolvedLayout, SpatialRelation, TERRAIN_ANCHORS};

use crate::geometry::{GeometryError, Point2, Region, Transform};
use crate::terrain::Heightfield;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("invalid layout spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    InvalidRegion(#[from] GeometryError),
    #[error("path has zero length")]
    DegeneratePath,
    #[error("child {child} escapes its parent region")]
    ChildRegionEscapesParent { child: usize },
    #[error("nested layouts deeper than {MAX_NESTING_DEPTH} levels")]
    NestingTooDeep,
    #[error("unknown anchor `{0}`")]
    UnknownAnchor(String),
    #[error("unsupported relation: {0}")]
    UnsupportedRelation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    Scatter,
    Grid,
    Linear,
    Nested,
    AreaFill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayoutSpec {
    /// Dart throwing with a budget of `30 * count` attempts.
    Scatter {
        region: Region,
        count: usize,
        min_separation: f64,
        seed: u64,
        /// Candidates inside any of these are rejected.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        exclusions: Vec<Region>,
    },
    /// `rows * cols` points at `origin + (col, row) * spacing`, each
    /// jittered uniformly within `[-jitter, jitter]^2`.
    Grid {
        origin: Point2,
        rows: usize,
        cols: usize,
        spacing: f64,
        #[serde(default)]
        jitter: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Points every `spacing` meters of arc length, offset along the left
    /// normal.
    Linear {
        path: Vec<Point2>,
        spacing: f64,
        #[serde(default)]
        lateral_offset: f64,
        #[serde(default)]
        align_to_tangent: bool,
    },
    /// Concatenation of child layouts, each confined to `parent`.
    Nested { parent: Region, children: Vec<LayoutSpec> },
    /// Row-major lattice of `footprint + gap` cells clipped to `region`.
    AreaFill {
        region: Region,
        footprint: [f64; 2],
        #[serde(default)]
        gap: f64,
        /// Degrees; multiples of 90 only.
        #[serde(default)]
        orientation: f64,
    },
}

impl LayoutSpec {
    pub fn kind(&self) -> LayoutKind {
        match self {
            LayoutSpec::Scatter { .. } => LayoutKind::Scatter,
            LayoutSpec::Grid { .. } => LayoutKind::Grid,
            LayoutSpec::Linear { .. } => LayoutKind::Linear,
            LayoutSpec::Nested { .. } => LayoutKind::Nested,
            LayoutSpec::AreaFill { .. } => LayoutKind::AreaFill,
        }
    }

    pub fn generate(&self) -> Result<Placement, LayoutError> {
        match self {
            LayoutSpec::Scatter { .. } => scatter(self),
            LayoutSpec::Grid { .. } => grid(self),
            LayoutSpec::Linear { .. } => linear(self),
            LayoutSpec::Nested { .. } => nested(self),
            LayoutSpec::AreaFill { .. } => area_fill(self),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedPoint {
    pub transform: Transform,
    /// Child index path inside nested layouts, outermost first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub group: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlacementFlags {
    /// Fewer points than requested fit.
    pub saturated: bool,
    /// The footprint does not fit the region anywhere.
    pub footprint_too_large: bool,
    /// Points removed by terrain projection (outside the heightfield).
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub kind: LayoutKind,
    pub seed: u64,
    pub points: Vec<PlacedPoint>,
    pub flags: PlacementFlags,
}

impl Placement {
    pub fn empty(kind: LayoutKind, seed: u64) -> Self {
        Self { kind, seed, points: Vec::new(), flags: PlacementFlags::default() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = Point2> + '_ {
        self.points.iter().map(|p| [p.transform.position.x, p.transform.position.y])
    }
}

/// Sets each point's z to the terrain height below it. Points outside the
/// heightfield are dropped and counted in `flags.dropped`.
pub fn project_to_terrain(placement: &Placement, hf: &Heightfield) -> Placement {
    let mut out = placement.clone();
    out.points.clear();
    for p in &placement.points {
        let pos = p.transform.position;
        match hf.sample_height(pos.x, pos.y) {
            Ok(z) => {
                let mut q = p.clone();
                q.transform.position.z = z;
                out.points.push(q);
            }
            Err(_) => out.flags.dropped += 1,
        }
    }
    out
}
