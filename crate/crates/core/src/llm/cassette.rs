use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChatMessage, LlmError};
use crate::canonical::to_canonical_string;

pub const CASSETTE_SCHEMA: &str = "cassette/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CassetteEntry {
    pub hash: String,
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub response: String,
}

/// Ordered request/response pairs. Entries sharing a hash are replayed in
/// recording order, and the last one repeats once the others are consumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cassette {
    pub schema: String,
    pub entries: Vec<CassetteEntry>,
}

impl Default for Cassette {
    fn default() -> Self {
        Cassette { schema: CASSETTE_SCHEMA.into(), entries: vec![] }
    }
}

impl Cassette {
    pub fn parse(text: &str, path: &Path) -> Result<Self, LlmError> {
        let err = |message: String| LlmError::Cassette { path: path.to_path_buf(), message };
        let c: Cassette = serde_json::from_str(text).map_err(|e| err(format!("line {}: {e}", e.line())))?;
        if c.schema != CASSETTE_SCHEMA {
            return Err(err(format!("unsupported schema `{}`", c.schema)));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = fs::read_to_string(path)
            .map_err(|e| LlmError::Cassette { path: path.to_path_buf(), message: e.to_string() })?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        let err = |message: String| LlmError::Cassette { path: path.to_path_buf(), message };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| err(e.to_string()))?;
        }
        let text = to_canonical_string(self).map_err(|e| err(e.to_string()))?;
        fs::write(path, text).map_err(|e| err(e.to_string()))
    }

    pub fn by_hash(&self) -> HashMap<&str, Vec<&CassetteEntry>> {
        let mut map: HashMap<&str, Vec<&CassetteEntry>> = HashMap::new();
        for e in &self.entries {
            map.entry(e.hash.as_str()).or_default().push(e);
        }
        map
    }
}
