//! Plugin descriptors (machine-readable API documentation) and the static
//! asset catalog.
//!
//! On disk a registry is a directory holding `plugins/*.json`, one
//! `plugin/1` descriptor per file, and an optional `assets.jsonl` catalog.

mod catalog;
mod param;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::canonical;
pub use catalog::{parse_catalog, AssetRecord};
pub use param::{edit_distance, nearest, ParamKind, ParamSpec, ParamValue, ParamValues, Violation};

pub const PLUGIN_SCHEMA: &str = "plugin/1";

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("{path}:{line}: parse error: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: schema error in `{field}`: {message}")]
    Schema { path: PathBuf, field: String, message: String },
    #[error("duplicate plugin name `{0}`")]
    DuplicateName(String),
    #[error("duplicate asset id `{0}`")]
    DuplicateAsset(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RegistryError {
    /// Short machine-readable kind, used by the CLI's JSON errors.
    pub fn kind(&self) -> &'static str {
        match self {
            RegistryError::Parse { .. } => "ParseError",
            RegistryError::Schema { .. } => "SchemaError",
            RegistryError::DuplicateName(_) => "DuplicateName",
            RegistryError::DuplicateAsset(_) => "DuplicateAsset",
            RegistryError::Io { .. } => "IoError",
        }
    }
}

/// Closed capability vocabulary of the plugin hub.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Capability {
    Terrain,
    Weather,
    Vegetation,
    Buildings,
    Blocks,
    Cities,
    People,
    Water,
    Snow,
    AssetsPlacement,
    Materials,
    DynamicPeople,
    DynamicVegetation,
    DynamicVehicles,
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("capability serializes");
        f.write_str(v.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PluginDescriptor {
    pub name: String,
    pub capability: Capability,
    pub description: String,
    pub params: Vec<ParamSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamAssignment {
    pub plugin_name: String,
    pub values: ParamValues,
}

impl ParamAssignment {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.get(name)
    }

    pub fn f64(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(ParamValue::as_f64)
    }
}

impl PluginDescriptor {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn check_schema(&self) -> Result<(), (String, String)> {
        if self.name.trim().is_empty() {
            return Err(("name".into(), "plugin name is empty".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.params {
            if !seen.insert(p.name.as_str()) {
                return Err(("params".into(), format!("duplicate parameter `{}`", p.name)));
            }
            p.check_schema().map_err(|(f, m)| (f.to_string(), m))?;
        }
        Ok(())
    }

    /// Accepts `values` iff every entry names a known parameter and passes
    /// its type and range check. Never panics; all problems are returned.
    pub fn validate_params(&self, values: &ParamValues) -> Result<ParamAssignment, Vec<Violation>> {
        let mut accepted = ParamValues::new();
        let mut violations = Vec::new();
        for (name, value) in values {
            match self.param(name) {
                None => violations.push(Violation {
                    param: name.clone(),
                    reason: "unknown parameter".into(),
                    hint: nearest(name, self.params.iter().map(|p| p.name.as_str())).map(str::to_string),
                }),
                Some(spec) => match spec.check_value(value) {
                    Ok(v) => {
                        accepted.insert(name.clone(), v);
                    }
                    Err(v) => violations.push(v),
                },
            }
        }
        if violations.is_empty() {
            Ok(ParamAssignment { plugin_name: self.name.clone(), values: accepted })
        } else {
            Err(violations)
        }
    }

    /// Completes `partial` with each missing parameter's feasible value
    /// (its default when documented). Entries of `partial` are kept as given.
    pub fn fill_defaults(&self, partial: &ParamValues) -> ParamAssignment {
        let mut values = partial.clone();
        for spec in &self.params {
            values.entry(spec.name.clone()).or_insert_with(|| spec.feasible_value());
        }
        ParamAssignment { plugin_name: self.name.clone(), values }
    }

    /// Required parameters (no default) absent from `values`.
    pub fn missing_required(&self, values: &ParamValues) -> Vec<&ParamSpec> {
        self.params.iter().filter(|p| p.is_required() && !values.contains_key(&p.name)).collect()
    }

    pub fn to_json(&self) -> String {
        let mut v = canonical::to_canonical_value(self).expect("descriptor serializes");
        v.as_object_mut()
            .expect("object")
            .insert("schema".into(), Value::String(PLUGIN_SCHEMA.into()));
        let mut s = serde_json::to_string_pretty(&canonical::sort_keys(v)).expect("descriptor serializes");
        s.push('\n');
        s
    }

    /// Parses and validates one `plugin/1` document. `path` only labels
    /// errors.
    pub fn parse(text: &str, path: &Path) -> Result<Self, RegistryError> {
        let parse_err = |e: serde_json::Error| RegistryError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        };
        let schema_err = |field: &str, message: String| RegistryError::Schema {
            path: path.to_path_buf(),
            field: field.to_string(),
            message,
        };
        let mut v: Value = serde_json::from_str(text).map_err(parse_err)?;
        let obj = v.as_object_mut().ok_or_else(|| schema_err("schema", "expected an object".into()))?;
        match obj.remove("schema") {
            Some(Value::String(s)) if s == PLUGIN_SCHEMA => {}
            other => return Err(schema_err("schema", format!("expected \"{PLUGIN_SCHEMA}\", got {other:?}"))),
        }
        let desc: PluginDescriptor = serde_json::from_value(v).map_err(|e| {
            let msg = e.to_string();
            let field = if msg.contains("capability") || msg.contains("unknown variant") {
                "capability"
            } else {
                "descriptor"
            };
            schema_err(field, msg)
        })?;
        desc.check_schema().map_err(|(f, m)| schema_err(&f, m))?;
        Ok(desc)
    }
}

/// Immutable after load; safe to share across threads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    pub descriptors: BTreeMap<String, PluginDescriptor>,
    pub assets: BTreeMap<String, AssetRecord>,
}

impl Registry {
    pub fn descriptor(&self, name: &str) -> Option<&PluginDescriptor> {
        self.descriptors.get(name)
    }

    pub fn asset(&self, id: &str) -> Option<&AssetRecord> {
        self.assets.get(id)
    }

    pub fn insert_descriptor(&mut self, desc: PluginDescriptor) -> Result<(), RegistryError> {
        if self.descriptors.contains_key(&desc.name) {
            return Err(RegistryError::DuplicateName(desc.name));
        }
        self.descriptors.insert(desc.name.clone(), desc);
        Ok(())
    }

    pub fn insert_asset(&mut self, asset: AssetRecord) -> Result<(), RegistryError> {
        if self.assets.contains_key(&asset.id) {
            return Err(RegistryError::DuplicateAsset(asset.id));
        }
        self.assets.insert(asset.id.clone(), asset);
        Ok(())
    }

    /// Loads descriptor files. The result does not depend on the order of
    /// `paths`.
    pub fn load_descriptors<P: AsRef<Path>>(paths: &[P]) -> Result<Self, RegistryError> {
        let mut sorted: Vec<&Path> = paths.iter().map(AsRef::as_ref).collect();
        sorted.sort();
        let mut reg = Registry::default();
        for path in sorted {
            let text = read(path)?;
            reg.insert_descriptor(PluginDescriptor::parse(&text, path)?)?;
        }
        Ok(reg)
    }

    /// Loads `dir/plugins/*.json` and, when present, `dir/assets.jsonl`.
    pub fn load_dir(dir: &Path) -> Result<Self, RegistryError> {
        let plugin_dir = dir.join("plugins");
        let entries = std::fs::read_dir(&plugin_dir)
            .map_err(|source| RegistryError::Io { path: plugin_dir.clone(), source })?;
        let mut files = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|source| RegistryError::Io { path: plugin_dir.clone(), source })?;
            let p = entry.path();
            if p.extension().is_some_and(|e| e == "json") {
                files.push(p);
            }
        }
        let mut reg = Self::load_descriptors(&files)?;
        let catalog = dir.join("assets.jsonl");
        if catalog.exists() {
            for asset in parse_catalog(&read(&catalog)?, &catalog)? {
                reg.insert_asset(asset)?;
            }
        }
        Ok(reg)
    }

    /// Writes the registry in the layout [`Registry::load_dir`] reads.
    pub fn save_dir(&self, dir: &Path) -> Result<(), RegistryError> {
        let plugin_dir = dir.join("plugins");
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| RegistryError::Io { path, source }
        };
        std::fs::create_dir_all(&plugin_dir).map_err(io(&plugin_dir))?;
        for d in self.descriptors.values() {
            let p = plugin_dir.join(format!("{}.json", d.name));
            std::fs::write(&p, d.to_json()).map_err(io(&p))?;
        }
        if !self.assets.is_empty() {
            let p = dir.join("assets.jsonl");
            let body: String = self.assets.values().map(|a| a.to_json_line() + "\n").collect();
            std::fs::write(&p, body).map_err(io(&p))?;
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, RegistryError> {
    std::fs::read_to_string(path).map_err(|source| RegistryError::Io { path: path.to_path_buf(), source })
}
