//! Static-asset catalog in JSON-lines form.
//!
//! Each line is one record. The embedding may be given as a float array
//! (`"embedding"`), as base64 of little-endian `f32` values
//! (`"embedding_b64"`), or omitted, in which case the index derives one from
//! the asset's name, category and tags.

use std::path::Path;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::RegistryError;
use crate::retrieval::Embedding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetRecord {
    pub id: String,
    pub name: String,
    pub category: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Embedding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preview_path: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogLine {
    id: String,
    name: String,
    category: String,
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default)]
    embedding: Option<Vec<f64>>,
    #[serde(default)]
    embedding_b64: Option<String>,
    #[serde(default)]
    preview_path: Option<String>,
}

impl AssetRecord {
    /// Text the embedder sees when no precomputed vector is stored.
    pub fn description(&self) -> String {
        let mut s = format!("{} {}", self.name, self.category);
        for t in &self.tags {
            s.push(' ');
            s.push_str(t);
        }
        s
    }

    pub fn to_json_line(&self) -> String {
        crate::canonical::to_canonical_compact(self).expect("asset serializes")
    }
}

pub fn parse_catalog(text: &str, path: &Path) -> Result<Vec<AssetRecord>, RegistryError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CatalogLine = serde_json::from_str(line).map_err(|e| RegistryError::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let schema_err = |message: String| RegistryError::Schema {
            path: path.to_path_buf(),
            field: "embedding".into(),
            message: format!("line {line_no}: {message}"),
        };
        let raw = match (parsed.embedding, parsed.embedding_b64) {
            (Some(_), Some(_)) => return Err(schema_err("both embedding and embedding_b64 given".into())),
            (Some(v), None) => Some(v),
            (None, Some(b64)) => Some(decode_f32_le(&b64).map_err(schema_err)?),
            (None, None) => None,
        };
        let embedding = raw.map(|v| Embedding::from_unit(v).map_err(|e| schema_err(e.to_string()))).transpose()?;
        if parsed.id.trim().is_empty() {
            return Err(RegistryError::Schema {
                path: path.to_path_buf(),
                field: "id".into(),
                message: format!("line {line_no}: empty id"),
            });
        }
        out.push(AssetRecord {
            id: parsed.id,
            name: parsed.name,
            category: parsed.category,
            tags: parsed.tags,
            embedding,
            preview_path: parsed.preview_path,
        });
    }
    Ok(out)
}

fn decode_f32_le(b64: &str) -> Result<Vec<f64>, String> {
    let bytes = base64::engine::general_purpose::STANDARD.decode(b64).map_err(|e| e.to_string())?;
    if bytes.len() % 4 != 0 {
        return Err("base64 payload is not a whole number of f32 values".into());
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}
