//! The scene graph and its exporters (`scene/1` JSON and Wavefront OBJ).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::canonical;
use crate::geometry::{Aabb, GeometryError, Point2, Region, Transform, Vec3};
use crate::terrain::Heightfield;

pub const SCENE_SCHEMA: &str = "scene/1";

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("duplicate instance id `{0}`")]
    DuplicateId(String),
    #[error("invalid instance `{id}`: {source}")]
    InvalidInstance {
        id: String,
        #[source]
        source: GeometryError,
    },
    #[error("unsupported scene schema `{0}`")]
    SchemaUnsupported(String),
    #[error("scene parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetInstance {
    pub id: String,
    /// `asset:<catalog id>` or `api:<invoke action id>`.
    pub asset_ref: String,
    pub transform: Transform,
    #[serde(default)]
    pub tags: BTreeSet<String>,
    #[serde(default)]
    pub terrain_projected: bool,
}

impl AssetInstance {
    pub fn new(id: impl Into<String>, asset_ref: impl Into<String>, transform: Transform) -> Self {
        Self {
            id: id.into(),
            asset_ref: asset_ref.into(),
            transform,
            tags: BTreeSet::new(),
            terrain_projected: false,
        }
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tags.insert(tag.into());
        self
    }

    /// Axis-aligned proxy box: footprint `scale.x * scale.y` centered on the
    /// position, resting on it, `scale.z` tall.
    pub fn proxy_aabb(&self) -> Aabb {
        let p = self.transform.position;
        let s = self.transform.scale;
        Aabb {
            min: Vec3::new(p.x - s.x * 0.5, p.y - s.y * 0.5, p.z),
            max: Vec3::new(p.x + s.x * 0.5, p.y + s.y * 0.5, p.z + s.z),
        }
    }

    pub fn object_name(&self) -> Option<&str> {
        self.tags.iter().find_map(|t| t.strip_prefix(OBJECT_TAG))
    }
}

/// Tag prefix naming the planner object an instance belongs to.
pub const OBJECT_TAG: &str = "object:";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneGraph {
    pub seed: u64,
    #[serde(default)]
    pub instances: Vec<AssetInstance>,
    #[serde(default)]
    pub terrain: Option<Heightfield>,
    #[serde(default)]
    pub regions: BTreeMap<String, Region>,
    /// Named polylines (roads, rivers) usable as `along` anchors.
    #[serde(default)]
    pub paths: BTreeMap<String, Vec<Point2>>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl SceneGraph {
    pub fn new(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn add_instance(&mut self, inst: AssetInstance) -> Result<(), SceneError> {
        if self.instances.iter().any(|i| i.id == inst.id) {
            return Err(SceneError::DuplicateId(inst.id));
        }
        inst.transform
            .validate()
            .map_err(|source| SceneError::InvalidInstance { id: inst.id.clone(), source })?;
        self.instances.push(inst);
        Ok(())
    }

    pub fn instance(&self, id: &str) -> Option<&AssetInstance> {
        self.instances.iter().find(|i| i.id == id)
    }

    pub fn instances_of<'a>(&'a self, object: &'a str) -> impl Iterator<Item = &'a AssetInstance> + 'a {
        self.instances.iter().filter(move |i| i.object_name() == Some(object))
    }

    pub fn to_json(&self) -> String {
        let mut v = canonical::to_canonical_value(self).expect("scene serializes");
        v.as_object_mut()
            .expect("scene is an object")
            .insert("schema".into(), Value::String(SCENE_SCHEMA.into()));
        let mut s = serde_json::to_string_pretty(&canonical::sort_keys(v)).expect("scene serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let mut v: Value = serde_json::from_str(text).map_err(parse_error)?;
        let obj = v.as_object_mut().ok_or_else(|| SceneError::Parse {
            line: 1,
            column: 1,
            message: "expected a JSON object".into(),
        })?;
        match obj.remove("schema") {
            Some(Value::String(s)) if s == SCENE_SCHEMA => {}
            Some(Value::String(s)) => return Err(SceneError::SchemaUnsupported(s)),
            _ => return Err(SceneError::SchemaUnsupported("<missing>".into())),
        }
        let scene: SceneGraph = serde_json::from_value(v).map_err(parse_error)?;
        let mut seen = BTreeSet::new();
        for inst in &scene.instances {
            if !seen.insert(inst.id.as_str()) {
                return Err(SceneError::DuplicateId(inst.id.clone()));
            }
        }
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), SceneError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Terrain grid mesh followed by one box proxy per instance. Only `v`
    /// and `f` records are emitted.
    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        let mut base = 0usize;
        if let Some(hf) = &self.terrain {
            let n = hf.resolution;
            for row in 0..n {
                for col in 0..n {
                    let [x, y] = hf.node_position(col, row);
                    let _ = writeln!(out, "v {} {} {}", x, y, hf.height_at_node(col, row));
                }
            }
            for row in 0..n - 1 {
                for col in 0..n - 1 {
                    let a = row * n + col + 1;
                    let _ = writeln!(out, "f {} {} {} {}", a, a + 1, a + n + 1, a + n);
                }
            }
            base = n * n;
        }
        // Corner order follows Aabb::corners: bottom ring then top ring.
        const FACES: [[usize; 4]; 6] =
            [[1, 4, 3, 2], [5, 6, 7, 8], [1, 2, 6, 5], [2, 3, 7, 6], [3, 4, 8, 7], [4, 1, 5, 8]];
        for inst in &self.instances {
            for c in inst.proxy_aabb().corners() {
                let _ = writeln!(out, "v {} {} {}", c.x, c.y, c.z);
            }
            for f in FACES {
                let _ = writeln!(out, "f {} {} {} {}", base + f[0], base + f[1], base + f[2], base + f[3]);
            }
            base += 8;
        }
        out
    }
}

fn parse_error(e: serde_json::Error) -> SceneError {
    SceneError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
}
