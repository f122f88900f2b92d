//! Exact cosine-similarity search.
//!
//! Embeddings are unit-normalized once at build time, so scoring a course is
//! a single dot product against the normalized query. Selection keeps a
//! size-`k` min-priority queue during one pass over the corpus; the survivors
//! are then sorted by descending similarity, earlier catalog position first on
//! ties.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, LevelFilter};
use crate::embedding::{dot, l2_norm, EmbeddingVector};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("course {0} has no embedding")]
    MissingEmbedding(String),
    #[error("zero-length vector cannot be compared")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("k must be at least 1")]
    InvalidK,
}

/// One retrieved course.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCourse {
    pub course_id: String,
    pub similarity: f64,
    /// 1-based rank in the result list.
    pub rank: usize,
    /// Position of the course in the source catalog.
    #[serde(skip)]
    pub position: usize,
}

/// Normalized embeddings laid out row-major, in catalog order.
#[derive(Debug, Clone)]
pub struct SimilarityIndex {
    ids: Vec<String>,
    levels: Vec<u32>,
    vectors: Vec<f64>,
    dimension: usize,
}

/// Cosine similarity of two raw vectors, clamped to [-1, 1].
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, IndexError> {
    if a.len() != b.len() {
        return Err(IndexError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(IndexError::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Builds an index over a fully embedded catalog.
pub fn build_index(catalog: &Catalog) -> Result<SimilarityIndex, IndexError> {
    let entries = catalog
        .courses()
        .iter()
        .map(|c| {
            c.embedding
                .as_ref()
                .map(|e| (c.course_id.clone(), c.level, e))
                .ok_or_else(|| IndexError::MissingEmbedding(c.course_id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    SimilarityIndex::from_entries(entries)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    similarity: f64,
    position: usize,
}

// Greater means "better": higher similarity, then earlier position.
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.similarity
            .total_cmp(&other.similarity)
            .then_with(|| other.position.cmp(&self.position))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl SimilarityIndex {
    /// Builds an index from `(course_id, level, embedding)` triples in order.
    pub fn from_entries<'a, I>(entries: I) -> Result<Self, IndexError>
    where
        I: IntoIterator<Item = (String, u32, &'a EmbeddingVector)>,
    {
        let mut ids = Vec::new();
        let mut levels = Vec::new();
        let mut vectors = Vec::new();
        let mut dimension = None;
        for (id, level, embedding) in entries {
            let expected = *dimension.get_or_insert(embedding.dimension());
            if embedding.dimension() != expected {
                return Err(IndexError::DimensionMismatch {
                    expected,
                    found: embedding.dimension(),
                });
            }
            let norm = embedding.norm();
            if norm == 0.0 {
                return Err(IndexError::ZeroVector);
            }
            vectors.extend(embedding.values().iter().map(|v| v / norm));
            ids.push(id);
            levels.push(level);
        }
        Ok(Self {
            ids,
            levels,
            vectors,
            dimension: dimension.unwrap_or(0),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Embedding dimension; 0 for an empty index.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn course_id(&self, position: usize) -> &str {
        &self.ids[position]
    }

    pub fn level(&self, position: usize) -> u32 {
        self.levels[position]
    }

    /// The stored unit vector at `position`.
    pub fn unit_vector(&self, position: usize) -> &[f64] {
        let start = position * self.dimension;
        &self.vectors[start..start + self.dimension]
    }

    /// Number of entries passing `filter`.
    pub fn count_matching(&self, filter: LevelFilter) -> usize {
        self.levels.iter().filter(|l| filter.matches(**l)).count()
    }

    fn check_query(&self, query: &EmbeddingVector) -> Result<(), IndexError> {
        if !self.is_empty() && query.dimension() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                expected: self.dimension,
                found: query.dimension(),
            });
        }
        Ok(())
    }

    /// Cosine similarity of `query` against every entry, in catalog order.
    pub fn similarities(&self, query: &EmbeddingVector) -> Result<Vec<f64>, IndexError> {
        self.check_query(query)?;
        let unit = query.normalized();
        Ok((0..self.len())
            .map(|i| dot(unit.values(), self.unit_vector(i)).clamp(-1.0, 1.0))
            .collect())
    }

    /// The `k` most similar entries that pass `filter`, best first.
    ///
    /// Returns fewer than `k` results when fewer entries pass the filter, and
    /// an empty list when none do.
    pub fn top_k(
        &self,
        query: &EmbeddingVector,
        k: usize,
        filter: LevelFilter,
    ) -> Result<Vec<ScoredCourse>, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        self.check_query(query)?;
        let unit = query.normalized();

        let mut heap: BinaryHeap<Reverse<Candidate>> = BinaryHeap::with_capacity(k + 1);
        for (position, level) in self.levels.iter().enumerate() {
            if !filter.matches(*level) {
                continue;
            }
            let similarity = dot(unit.values(), self.unit_vector(position)).clamp(-1.0, 1.0);
            let candidate = Candidate { similarity, position };
            if heap.len() < k {
                heap.push(Reverse(candidate));
            } else if let Some(Reverse(worst)) = heap.peek() {
                if similarity > worst.similarity {
                    heap.pop();
                    heap.push(Reverse(candidate));
                }
            }
        }

        let mut selected: Vec<Candidate> = heap.into_iter().map(|Reverse(c)| c).collect();
        selected.sort_unstable_by(|a, b| b.cmp(a));
        Ok(selected
            .into_iter()
            .enumerate()
            .map(|(i, c)| ScoredCourse {
                course_id: self.ids[c.position].clone(),
                similarity: c.similarity,
                rank: i + 1,
                position: c.position,
            })
            .collect())
    }
}
