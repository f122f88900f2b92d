//! The course corpus every other module consumes.
//!
//! A [`Catalog`] is an ordered, validated list of [`CourseRecord`]s. Course
//! order is significant: it is the tie-break order for similarity search, so it
//! is preserved through loading, embedding, and saving.

mod embed;
mod io;
mod level;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embedding::EmbeddingVector;
use crate::provider::ProviderError;

pub use embed::{embed_catalog, EmbedOptions, EmbedReport, EmbeddingCache};
pub use io::CatalogFormat;
pub use level::{LevelFilter, LevelFilterError};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate course_id {course_id:?}")]
    DuplicateId { course_id: String, line: usize },
    #[error("course {course_id}: embedding has dimension {found}, catalog dimension is {expected}")]
    DimensionMismatch {
        course_id: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {message}")]
    InvalidRecord { line: usize, message: String },
    #[error("course {0} has neither a title nor a description to embed")]
    EmptyCourse(String),
    #[error("batch size must be at least 1")]
    InvalidBatchSize,
    #[error("embedding failed for course {course_id} ({failed} course(s) failed in total): {source}")]
    Provider {
        course_id: String,
        failed: usize,
        #[source]
        source: ProviderError,
    },
    #[error("unknown catalog format {0:?} (expected csv or jsonl)")]
    UnknownFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One course offering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseRecord {
    pub course_id: String,
    pub level: u32,
    pub subject: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub embedding: Option<EmbeddingVector>,
}

impl CourseRecord {
    pub fn new(
        course_id: impl Into<String>,
        level: u32,
        subject: impl Into<String>,
        title: impl Into<String>,
        description: impl Into<String>,
    ) -> Self {
        Self {
            course_id: course_id.into(),
            level,
            subject: subject.into(),
            title: title.into(),
            description: description.into(),
            embedding: None,
        }
    }

    pub fn with_embedding(mut self, embedding: EmbeddingVector) -> Self {
        self.embedding = Some(embedding);
        self
    }

    /// Text that represents this course in embedding space: the description,
    /// or the title for title-only courses. `None` when both are blank.
    pub fn embedding_text(&self) -> Option<&str> {
        let description = self.description.trim();
        if !description.is_empty() {
            return Some(description);
        }
        let title = self.title.trim();
        (!title.is_empty()).then_some(title)
    }

    /// Hundreds bucket of the first three-digit number in the course id, if any.
    pub fn derived_level(&self) -> Option<u32> {
        let digits: String = self
            .course_id
            .chars()
            .skip_while(|c| !c.is_ascii_digit())
            .take_while(|c| c.is_ascii_digit())
            .collect();
        if digits.len() != 3 {
            return None;
        }
        digits.parse::<u32>().ok().map(|n| n / 100 * 100)
    }
}

/// An ordered, validated course collection.
#[derive(Debug, Clone)]
pub struct Catalog {
    courses: Vec<CourseRecord>,
    dimension: Option<usize>,
    source_digest: String,
    positions: HashMap<String, usize>,
    warnings: Vec<String>,
}

impl PartialEq for Catalog {
    fn eq(&self, other: &Self) -> bool {
        self.courses == other.courses && self.dimension == other.dimension
    }
}

impl Catalog {
    /// Validates `records` and builds a catalog.
    ///
    /// Errors report the 1-based record number as `line`.
    pub fn from_records(records: Vec<CourseRecord>) -> Result<Self, CatalogError> {
        Self::from_numbered(records.into_iter().enumerate().map(|(i, r)| (i + 1, r)))
    }

    pub fn empty() -> Self {
        Self::from_records(Vec::new()).expect("empty catalog is valid")
    }

    pub(crate) fn from_numbered(
        records: impl IntoIterator<Item = (usize, CourseRecord)>,
    ) -> Result<Self, CatalogError> {
        let mut courses = Vec::new();
        let mut positions = HashMap::new();
        let mut warnings = Vec::new();
        let mut dimension: Option<usize> = None;

        for (line, mut record) in records {
            record.course_id = record.course_id.trim().to_string();
            if record.course_id.is_empty() {
                return Err(CatalogError::InvalidRecord {
                    line,
                    message: "course_id is empty".into(),
                });
            }
            if record.level == 0 || record.level % 100 != 0 {
                return Err(CatalogError::InvalidRecord {
                    line,
                    message: format!(
                        "course {}: level {} is not a positive multiple of 100",
                        record.course_id, record.level
                    ),
                });
            }
            if let Some(derived) = record.derived_level() {
                if derived != record.level {
                    let warning = format!(
                        "course {}: stored level {} disagrees with course number (suggests {})",
                        record.course_id, record.level, derived
                    );
                    tracing::warn!("{warning}");
                    warnings.push(warning);
                }
            }
            if let Some(embedding) = &record.embedding {
                match dimension {
                    None => dimension = Some(embedding.dimension()),
                    Some(expected) if expected != embedding.dimension() => {
                        return Err(CatalogError::DimensionMismatch {
                            course_id: record.course_id,
                            expected,
                            found: embedding.dimension(),
                        });
                    }
                    Some(_) => {}
                }
            }
            if positions.contains_key(&record.course_id) {
                return Err(CatalogError::DuplicateId {
                    course_id: record.course_id,
                    line,
                });
            }
            positions.insert(record.course_id.clone(), courses.len());
            courses.push(record);
        }

        let mut catalog = Catalog {
            courses,
            dimension,
            source_digest: String::new(),
            positions,
            warnings,
        };
        catalog.refresh_digest();
        Ok(catalog)
    }

    pub fn courses(&self) -> &[CourseRecord] {
        &self.courses
    }

    pub fn len(&self) -> usize {
        self.courses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.courses.is_empty()
    }

    /// Embedding dimension, known once at least one course is embedded.
    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    /// SHA-256 over the catalog content, embeddings included.
    pub fn source_digest(&self) -> &str {
        &self.source_digest
    }

    /// Level/course-number disagreements noticed during validation.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn get(&self, course_id: &str) -> Option<&CourseRecord> {
        self.position(course_id).map(|i| &self.courses[i])
    }

    pub fn position(&self, course_id: &str) -> Option<usize> {
        self.positions.get(course_id).copied()
    }

    pub fn is_fully_embedded(&self) -> bool {
        self.courses.iter().all(|c| c.embedding.is_some())
    }

    /// Distinct subject codes in order of first appearance.
    pub fn subjects(&self) -> Vec<&str> {
        let mut seen = std::collections::HashSet::new();
        self.courses
            .iter()
            .map(|c| c.subject.as_str())
            .filter(|s| seen.insert(*s))
            .collect()
    }

    /// Courses whose level satisfies `filter`, in catalog order.
    pub fn filter_by_level(&self, filter: LevelFilter) -> CatalogView<'_> {
        let positions = self
            .courses
            .iter()
            .enumerate()
            .filter(|(_, c)| filter.matches(c.level))
            .map(|(i, _)| i)
            .collect();
        CatalogView {
            catalog: self,
            positions,
        }
    }

    pub(crate) fn set_embedding(
        &mut self,
        position: usize,
        embedding: EmbeddingVector,
    ) -> Result<(), CatalogError> {
        let course = &mut self.courses[position];
        match self.dimension {
            Some(expected) if expected != embedding.dimension() => {
                return Err(CatalogError::DimensionMismatch {
                    course_id: course.course_id.clone(),
                    expected,
                    found: embedding.dimension(),
                })
            }
            Some(_) => {}
            None => self.dimension = Some(embedding.dimension()),
        }
        course.embedding = Some(embedding);
        Ok(())
    }

    pub(crate) fn refresh_digest(&mut self) {
        let mut hasher = Sha256::new();
        for course in &self.courses {
            for field in [
                course.course_id.as_str(),
                course.subject.as_str(),
                course.title.as_str(),
                course.description.as_str(),
            ] {
                hasher.update((field.len() as u64).to_le_bytes());
                hasher.update(field.as_bytes());
            }
            hasher.update(course.level.to_le_bytes());
            match &course.embedding {
                None => hasher.update([0u8]),
                Some(e) => {
                    hasher.update([1u8]);
                    hasher.update((e.dimension() as u64).to_le_bytes());
                    for v in e.values() {
                        hasher.update(v.to_bits().to_le_bytes());
                    }
                }
            }
        }
        self.source_digest = hex::encode(hasher.finalize());
    }
}

/// A filtered, order-preserving view into a [`Catalog`].
#[derive(Debug, Clone)]
pub struct CatalogView<'a> {
    catalog: &'a Catalog,
    positions: Vec<usize>,
}

impl<'a> CatalogView<'a> {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Positions of the retained courses in the underlying catalog.
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a CourseRecord> + '_ {
        self.positions.iter().map(|&i| &self.catalog.courses[i])
    }

    /// Materializes the view as a standalone catalog.
    pub fn to_catalog(&self) -> Catalog {
        Catalog::from_records(self.iter().cloned().collect()).expect("subset of a valid catalog is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn course(id: &str, level: u32) -> CourseRecord {
        CourseRecord::new(id, level, id.split(' ').next().unwrap(), "Title", "Text")
    }

    #[test]
    fn derived_level_from_course_number() {
        assert_eq!(course("EECS 445", 400).derived_level(), Some(400));
        assert_eq!(course("MATH 116", 100).derived_level(), Some(100));
        assert_eq!(course("SPECIAL", 100).derived_level(), None);
        assert_eq!(course("X 1010", 100).derived_level(), None);
    }

    #[test]
    fn level_disagreement_is_a_warning() {
        let catalog = Catalog::from_records(vec![course("EECS 445", 300)]).unwrap();
        assert_eq!(catalog.warnings().len(), 1);
    }

    #[test]
    fn rejects_bad_levels_and_ids() {
        let err = Catalog::from_records(vec![course("EECS 445", 450)]).unwrap_err();
        assert!(matches!(err, CatalogError::InvalidRecord { line: 1, .. }));
        let err = Catalog::from_records(vec![course("  ", 100)]).unwrap_err();
        assert!(matches!(err, CatalogError::InvalidRecord { .. }));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Catalog::from_records(vec![course("EECS 445", 400), course("EECS 445", 400)]).unwrap_err();
        assert!(matches!(err, CatalogError::DuplicateId { line: 2, .. }));
    }

    #[test]
    fn embedding_text_falls_back_to_title() {
        let mut c = course("COMP 100", 100);
        c.description = "   ".into();
        assert_eq!(c.embedding_text(), Some("Title"));
        c.title.clear();
        assert_eq!(c.embedding_text(), None);
    }

    #[test]
    fn filter_examples() {
        let catalog = Catalog::from_records(vec![
            course("A 100", 100),
            course("B 200", 200),
            course("C 300", 300),
            course("D 500", 500),
        ])
        .unwrap();
        let range = catalog.filter_by_level(LevelFilter::range(100, 200).unwrap());
        let levels: Vec<u32> = range.iter().map(|c| c.level).collect();
        assert_eq!(levels, vec![100, 200]);
        assert_eq!(catalog.filter_by_level(LevelFilter::All).len(), 4);
        let grads = catalog.filter_by_level(LevelFilter::min(500).unwrap());
        assert_eq!(grads.positions(), &[3]);

        let undergrad = catalog
            .filter_by_level(LevelFilter::range(100, 400).unwrap())
            .to_catalog();
        assert!(undergrad
            .filter_by_level(LevelFilter::min(500).unwrap())
            .is_empty());
    }

    #[test]
    fn digest_tracks_content() {
        let a = Catalog::from_records(vec![course("A 100", 100)]).unwrap();
        let b = Catalog::from_records(vec![course("A 100", 100)]).unwrap();
        assert_eq!(a.source_digest(), b.source_digest());
        let mut changed = course("A 100", 100);
        changed.description = "Other".into();
        let c = Catalog::from_records(vec![changed]).unwrap();
        assert_ne!(a.source_digest(), c.source_digest());
    }
}
