//! Text embedders. The mock is a hashed bag of character trigrams: each
//! lowercase alphanumeric word is padded as `" word "`, every character
//! trigram is hashed with 64-bit FNV-1a into `hash % dim`, the counts are
//! summed and the vector is L2-normalized. Lexically related texts share
//! trigrams and score higher; results are bit-identical on every platform.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Embedding, RetrievalError};
use crate::rng::fnv1a64;

pub const DEFAULT_DIM: usize = 768;

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    /// Deterministic for a fixed input.
    fn embed_text(&self, text: &str) -> Result<Embedding, RetrievalError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MockEmbedder {
    dim: usize,
}

impl MockEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }
}

impl Default for MockEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

/// Lowercase alphanumeric words of `text`.
pub fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn trigrams(word: &str) -> Vec<String> {
    let padded: Vec<char> = format!(" {word} ").chars().collect();
    padded.windows(3).map(|w| w.iter().collect()).collect()
}

impl Embedder for MockEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Embedding, RetrievalError> {
        let mut v = vec![0.0; self.dim];
        let mut any = false;
        for w in words(text) {
            for t in trigrams(&w) {
                v[(fnv1a64(t.as_bytes()) % self.dim as u64) as usize] += 1.0;
                any = true;
            }
        }
        if !any {
            return Err(RetrievalError::EmptyText);
        }
        Embedding::normalize(v)
    }
}

/// Posts `{"input": text, "model": ...}` and accepts a bare float array,
/// `{"embedding": [...]}`, or `{"data": [{"embedding": [...]}]}`.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    pub endpoint: String,
    pub model: Option<String>,
    pub dim: usize,
    pub timeout: Duration,
}

impl Embedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Embedding, RetrievalError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut body = serde_json::json!({ "input": text });
        if let Some(m) = &self.model {
            body["model"] = Value::String(m.clone());
        }
        let resp: Value = agent
            .post(&self.endpoint)
            .send_json(&body)
            .map_err(|e| RetrievalError::Transport(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| RetrievalError::Transport(e.to_string()))?;
        let values = extract_vector(&resp).ok_or_else(|| RetrievalError::Transport("no embedding in response".into()))?;
        if values.len() != self.dim {
            return Err(RetrievalError::DimensionMismatch { expected: self.dim, got: values.len() });
        }
        Embedding::normalize(values)
    }
}

fn extract_vector(v: &Value) -> Option<Vec<f64>> {
    let arr = match v {
        Value::Array(_) => v,
        Value::Object(o) => o
            .get("embedding")
            .or_else(|| o.get("data").and_then(|d| d.get(0)).and_then(|d| d.get("embedding")))?,
        _ => return None,
    };
    arr.as_array()?.iter().map(Value::as_f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderConfig {
    Mock {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Http {
        endpoint: String,
        dim: usize,
        #[serde(default)]
        model: Option<String>,
    },
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Mock { dim: DEFAULT_DIM }
    }
}

impl EmbedderConfig {
    pub fn build(&self) -> Box<dyn Embedder> {
        match self {
            EmbedderConfig::Mock { dim } => Box::new(MockEmbedder::new(*dim)),
            EmbedderConfig::Http { endpoint, dim, model } => Box::new(HttpEmbedder {
                endpoint: endpoint.clone(),
                model: model.clone(),
                dim: *dim,
                timeout: Duration::from_secs(60),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigram_padding() {
        assert_eq!(trigrams("oak"), vec![" oa", "oak", "ak "]);
        assert_eq!(words("Oak-tree, TALL!"), vec!["oak", "tree", "tall"]);
    }

    #[test]
    fn mock_is_deterministic_and_unit() {
        let e = MockEmbedder::default();
        let a = e.embed_text("a pine forest").unwrap();
        let b = e.embed_text("a pine forest").unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert_eq!(a.dim(), 768);
        assert!(matches!(e.embed_text("  ,, "), Err(RetrievalError::EmptyText)));
    }

    #[test]
    fn extract_vector_shapes() {
        let v = serde_json::json!([1.0, 2.0]);
        assert_eq!(extract_vector(&v), Some(vec![1.0, 2.0]));
        let v = serde_json::json!({"data": [{"embedding": [3.0]}]});
        assert_eq!(extract_vector(&v), Some(vec![3.0]));
        assert_eq!(extract_vector(&serde_json::json!({"x": 1})), None);
    }
}
