//! Subject-level similarity networks.
//!
//! A subject is represented by the L2-normalized mean of its course
//! embeddings; edges carry the cosine similarity between subject vectors.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::catalog::Catalog;
use crate::embedding::{dot, l2_norm, EmbeddingVector};

// Mean norms below this fraction of the average course norm count as cancelled.
const ZERO_MEAN_TOLERANCE: f64 = 1e-12;

pub fn subject_embedding(catalog: &Catalog, subject: &str) -> Result<EmbeddingVector, ExperimentError> {
    let mut sum: Option<Vec<f64>> = None;
    let mut count = 0usize;
    let mut norm_total = 0.0;
    for course in catalog.courses().iter().filter(|c| c.subject == subject) {
        let embedding = course
            .embedding
            .as_ref()
            .ok_or_else(|| ExperimentError::MissingEmbedding {
                subject: subject.to_string(),
                course_id: course.course_id.clone(),
            })?;
        let acc = sum.get_or_insert_with(|| vec![0.0; embedding.dimension()]);
        for (a, v) in acc.iter_mut().zip(embedding.values()) {
            *a += v;
        }
        norm_total += embedding.norm();
        count += 1;
    }
    let sum = sum.ok_or_else(|| ExperimentError::UnknownSubject(subject.to_string()))?;
    let mean: Vec<f64> = sum.into_iter().map(|v| v / count as f64).collect();
    let norm = l2_norm(&mean);
    if norm <= ZERO_MEAN_TOLERANCE * (norm_total / count as f64) {
        return Err(ExperimentError::ZeroMean(subject.to_string()));
    }
    EmbeddingVector::new(mean.into_iter().map(|v| v / norm).collect())
        .map_err(|_| ExperimentError::ZeroMean(subject.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEdge {
    pub a: String,
    pub b: String,
    pub similarity: f64,
}

/// Subjects and their pairwise similarities, one edge per unordered pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectNetwork {
    pub nodes: Vec<String>,
    pub edges: Vec<SubjectEdge>,
    #[serde(skip)]
    vectors: Vec<EmbeddingVector>,
}

pub fn subject_network(catalog: &Catalog, subjects: &[&str]) -> Result<SubjectNetwork, ExperimentError> {
    if subjects.len() < 2 {
        return Err(ExperimentError::InvalidArgument(
            "a subject network needs at least two subjects".into(),
        ));
    }
    for (i, s) in subjects.iter().enumerate() {
        if subjects[..i].contains(s) {
            return Err(ExperimentError::InvalidArgument(format!(
                "subject {s} listed twice"
            )));
        }
    }
    let vectors = subjects
        .iter()
        .map(|s| subject_embedding(catalog, s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut edges = Vec::new();
    for i in 0..subjects.len() {
        for j in i + 1..subjects.len() {
            edges.push(SubjectEdge {
                a: subjects[i].to_string(),
                b: subjects[j].to_string(),
                similarity: dot(vectors[i].values(), vectors[j].values()).clamp(-1.0, 1.0),
            });
        }
    }
    Ok(SubjectNetwork {
        nodes: subjects.iter().map(|s| s.to_string()).collect(),
        edges,
        vectors,
    })
}

impl SubjectNetwork {
    /// Similarity between two subjects in either order.
    pub fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        self.edges
            .iter()
            .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
            .map(|e| e.similarity)
    }

    /// Full symmetric matrix in node order. The diagonal is the similarity of
    /// each subject vector with itself.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let n = self.nodes.len();
        let mut m = vec![vec![0.0; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = match self.vectors.get(i) {
                Some(v) => dot(v.values(), v.values()).clamp(-1.0, 1.0),
                None => 1.0,
            };
        }
        for edge in &self.edges {
            let i = self.nodes.iter().position(|n| *n == edge.a).expect("edge node");
            let j = self.nodes.iter().position(|n| *n == edge.b).expect("edge node");
            m[i][j] = edge.similarity;
            m[j][i] = edge.similarity;
        }
        m
    }

    /// Graphviz rendering; edges colored from blue (least similar) to red
    /// (most similar) and labeled with their similarity.
    pub fn to_dot(&self) -> String {
        let (lo, hi) = self
            .edges
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
                (lo.min(e.similarity), hi.max(e.similarity))
            });
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut out = String::from("graph subjects {\n  node [shape=ellipse];\n");
        for node in &self.nodes {
            let _ = writeln!(out, "  \"{node}\";");
        }
        for e in &self.edges {
            let t = (e.similarity - lo) / span;
            let hue = 0.66 * (1.0 - t);
            let _ = writeln!(
                out,
                "  \"{}\" -- \"{}\" [label=\"{:.3}\", similarity={:.6}, color=\"{:.3} 0.9 0.9\"];",
                e.a, e.b, e.similarity, e.similarity, hue
            );
        }
        out.push_str("}\n");
        out
    }

    /// `a,b,similarity` rows.
    pub fn to_csv(&self) -> Result<String, ExperimentError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["a", "b", "similarity"])?;
        for e in &self.edges {
            writer.write_record([e.a.as_str(), e.b.as_str(), &e.similarity.to_string()])?;
        }
        let bytes = writer.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}
