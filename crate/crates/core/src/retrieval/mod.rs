//! Exact cosine retrieval over assets and API descriptions.
//!
//! API lookups take the single best match; asset lookups draw uniformly
//! from the five best matches with a seeded generator.

mod embedder;
mod embedding;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embedder::{trigrams, words, Embedder, EmbedderConfig, HttpEmbedder, MockEmbedder, DEFAULT_DIM};
pub use embedding::{cosine_similarity, Embedding, NORM_TOLERANCE};

use crate::registry::Registry;
use crate::rng;

/// Candidates considered by [`select_top5`].
pub const ASSET_CANDIDATES: usize = 5;

/// Minimum similarity for an API match to win over asset retrieval. Tuned for
/// the trigram mock embedder, whose scores run lower than dense models.
pub const DEFAULT_API_THRESHOLD: f64 = 0.32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding is not unit length (norm {0})")]
    NotNormalized(f64),
    #[error("embedding has zero length")]
    ZeroVector,
    #[error("embedding has non-finite components")]
    NonFinite,
    #[error("text has nothing to embed")]
    EmptyText,
    #[error("index has no matching entries")]
    EmptyIndex,
    #[error("k must be >= 1")]
    InvalidK,
    #[error("embedder transport error: {0}")]
    Transport(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Asset,
    Api,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub key: String,
    pub embedding: Embedding,
    pub kind: EntryKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub key: String,
    pub score: f64,
}

/// Immutable after build; queries are reentrant.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingIndex {
    dim: usize,
    entries: Vec<IndexEntry>,
}

impl EmbeddingIndex {
    pub fn new(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn insert(&mut self, key: impl Into<String>, embedding: Embedding, kind: EntryKind) -> Result<(), RetrievalError> {
        if embedding.dim() != self.dim {
            return Err(RetrievalError::DimensionMismatch { expected: self.dim, got: embedding.dim() });
        }
        self.entries.push(IndexEntry { key: key.into(), embedding, kind });
        Ok(())
    }

    /// Indexes every descriptor (by its description text) and every asset
    /// (stored vector, or the embedder applied to its description).
    pub fn build(registry: &Registry, embedder: &dyn Embedder) -> Result<Self, RetrievalError> {
        let mut index = Self::new(embedder.dim());
        for d in registry.descriptors.values() {
            index.insert(d.name.clone(), embedder.embed_text(&d.description)?, EntryKind::Api)?;
        }
        for a in registry.assets.values() {
            let e = match &a.embedding {
                Some(e) => e.clone(),
                None => embedder.embed_text(&a.description())?,
            };
            index.insert(a.id.clone(), e, EntryKind::Asset)?;
        }
        Ok(index)
    }

    /// Entries of `kind` (all when `None`) ranked by descending cosine
    /// similarity; exact ties are broken by ascending key.
    pub fn top_k(&self, query: &Embedding, k: usize, kind: Option<EntryKind>) -> Result<Vec<Scored>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        if query.dim() != self.dim {
            return Err(RetrievalError::DimensionMismatch { expected: self.dim, got: query.dim() });
        }
        let mut scored = self
            .entries
            .iter()
            .filter(|e| kind.is_none_or(|k| e.kind == k))
            .map(|e| Ok(Scored { key: e.key.clone(), score: cosine_similarity(query, &e.embedding)? }))
            .collect::<Result<Vec<_>, RetrievalError>>()?;
        if scored.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.key.cmp(&b.key)));
        scored.truncate(k);
        Ok(scored)
    }
}

/// Uniform draw among the first `min(5, len)` entries of a ranked list.
pub fn select_top5(ranked: &[Scored], seed: u64) -> Option<&Scored> {
    if ranked.is_empty() {
        return None;
    }
    let n = ranked.len().min(ASSET_CANDIDATES);
    let mut r = rng::seeded(seed);
    Some(&ranked[r.random_range(0..n)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RetrievalHit {
    Asset { id: String, score: f64, candidates: Vec<Scored> },
    Api { name: String, score: f64 },
}

/// Resolves a query to an API (best description match at or above
/// `api_threshold`) or else to an asset drawn by [`select_top5`]. Falls back
/// to the best API when the catalog has no assets.
pub fn retrieve(
    index: &EmbeddingIndex,
    query: &str,
    embedder: &dyn Embedder,
    seed: u64,
    api_threshold: f64,
) -> Result<RetrievalHit, RetrievalError> {
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let q = embedder.embed_text(query)?;
    let best_api = match index.top_k(&q, 1, Some(EntryKind::Api)) {
        Ok(mut v) => v.pop(),
        Err(RetrievalError::EmptyIndex) => None,
        Err(e) => return Err(e),
    };
    if let Some(api) = &best_api {
        if api.score >= api_threshold {
            return Ok(RetrievalHit::Api { name: api.key.clone(), score: api.score });
        }
    }
    match index.top_k(&q, ASSET_CANDIDATES, Some(EntryKind::Asset)) {
        Ok(candidates) => {
            let pick = select_top5(&candidates, seed).expect("non-empty").clone();
            Ok(RetrievalHit::Asset { id: pick.key, score: pick.score, candidates })
        }
        Err(RetrievalError::EmptyIndex) => best_api
            .map(|a| RetrievalHit::Api { name: a.key, score: a.score })
            .ok_or(RetrievalError::EmptyIndex),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> Embedding {
        Embedding::normalize(v.to_vec()).unwrap()
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn cosine_examples() {
        let e1 = Embedding::basis(4, 0);
        let e2 = Embedding::basis(4, 1);
        assert_eq!(cosine_similarity(&e1, &e1).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&e1, &e2).unwrap(), 0.0);
        let d = unit(&[1.0, 1.0, 0.0, 0.0]);
        assert!((cosine_similarity(&d, &e1).unwrap() - 0.70711).abs() < 1e-5);
        assert!(matches!(
            cosine_similarity(&e1, &Embedding::basis(3, 0)),
            Err(RetrievalError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn top_k_ties_and_errors() {
        let mut idx = EmbeddingIndex::new(3);
        assert_eq!(idx.top_k(&Embedding::basis(3, 0), 1, None), Err(RetrievalError::EmptyIndex));
        idx.insert("b", Embedding::basis(3, 0), EntryKind::Asset).unwrap();
        idx.insert("a", Embedding::basis(3, 0), EntryKind::Asset).unwrap();
        idx.insert("c", Embedding::basis(3, 1), EntryKind::Asset).unwrap();
        let r = idx.top_k(&Embedding::basis(3, 0), 2, None).unwrap();
        assert_eq!(r.iter().map(|s| s.key.as_str()).collect::<Vec<_>>(), vec!["a", "b"]);
        assert_eq!(idx.top_k(&Embedding::basis(3, 0), 0, None), Err(RetrievalError::InvalidK));
        assert_eq!(idx.top_k(&Embedding::basis(3, 0), 10, None).unwrap().len(), 3);
        assert_eq!(idx.top_k(&Embedding::basis(3, 0), 1, Some(EntryKind::Api)), Err(RetrievalError::EmptyIndex));
    }

    #[test]
    fn select_top5_single_and_deterministic() {
        let one = vec![Scored { key: "x".into(), score: 0.3 }];
        for seed in 0..50 {
            assert_eq!(select_top5(&one, seed).unwrap().key, "x");
        }
        let five: Vec<Scored> = (0..7).map(|i| Scored { key: format!("k{i}"), score: 1.0 - i as f64 * 0.1 }).collect();
        assert_eq!(select_top5(&five, 11), select_top5(&five, 11));
        assert!((0..200).all(|s| select_top5(&five, s).unwrap().key.as_str() < "k5"));
        assert!(select_top5(&[], 0).is_none());
    }

    #[test]
    fn embedding_rejects_non_unit_on_deserialize() {
        assert!(serde_json::from_str::<Embedding>("[0.6, 0.8]").is_ok());
        assert!(serde_json::from_str::<Embedding>("[1.0, 1.0]").is_err());
    }
}
