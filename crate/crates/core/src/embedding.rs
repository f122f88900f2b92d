//! Dense embedding vectors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dimension of the embedding space used by default (ada-002 sized).
pub const DEFAULT_DIMENSION: usize = 1536;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VectorError {
    #[error("embedding vector is empty")]
    Empty,
    #[error("embedding component {index} is not finite")]
    NonFinite { index: usize },
    #[error("embedding vector has zero norm")]
    ZeroVector,
}

/// A finite, non-zero real vector.
///
/// Construction validates both properties, so every `EmbeddingVector` in the
/// program can be normalized and compared by cosine similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, VectorError> {
        if values.is_empty() {
            return Err(VectorError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(VectorError::NonFinite { index });
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(VectorError::ZeroVector);
        }
        Ok(Self { values })
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    /// Unit-length copy of this vector.
    pub fn normalized(&self) -> EmbeddingVector {
        let norm = self.norm();
        EmbeddingVector {
            values: self.values.iter().map(|v| v / norm).collect(),
        }
    }

    /// Multiplies every component by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<EmbeddingVector, VectorError> {
        EmbeddingVector::new(self.values.iter().map(|v| v * factor).collect())
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = VectorError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        EmbeddingVector::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.values
    }
}

pub(crate) fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
