use serde::{Deserialize, Serialize};

use super::RetrievalError;

/// Unit-norm tolerance for stored vectors.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// An L2-normalized vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Scales `values` to unit length.
    pub fn normalize(values: Vec<f64>) -> Result<Self, RetrievalError> {
        if values.is_empty() {
            return Err(RetrievalError::ZeroVector);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RetrievalError::NonFinite);
        }
        let norm = l2(&values);
        if !(norm > 0.0) {
            return Err(RetrievalError::ZeroVector);
        }
        Ok(Embedding(values.into_iter().map(|v| v / norm).collect()))
    }

    /// Accepts a vector that is already unit length within
    /// [`NORM_TOLERANCE`], then renormalizes it exactly.
    pub fn from_unit(values: Vec<f64>) -> Result<Self, RetrievalError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RetrievalError::NonFinite);
        }
        let norm = l2(&values);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(RetrievalError::NotNormalized(norm));
        }
        Self::normalize(values)
    }

    /// The `i`-th standard basis vector of dimension `dim`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Embedding(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        l2(&self.0)
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = RetrievalError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Embedding::from_unit(v)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, RetrievalError> {
    if a.dim() != b.dim() {
        return Err(RetrievalError::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    let denom = a.norm() * b.norm();
    Ok((dot / denom).clamp(-1.0, 1.0))
}
