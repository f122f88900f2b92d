use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use super::{Catalog, CatalogError, CourseRecord};
use crate::embedding::EmbeddingVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatalogFormat {
    Csv,
    Jsonl,
}

impl CatalogFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?;
        ext.parse().ok()
    }
}

impl FromStr for CatalogFormat {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(CatalogFormat::Csv),
            "jsonl" | "ndjson" => Ok(CatalogFormat::Jsonl),
            _ => Err(CatalogError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    course_id: String,
    level: u32,
    subject: String,
    title: String,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    embedding: Option<String>,
}

impl Catalog {
    pub fn load(path: impl AsRef<Path>, format: CatalogFormat) -> Result<Catalog, CatalogError> {
        let text = fs::read_to_string(path)?;
        match format {
            CatalogFormat::Jsonl => Catalog::parse_jsonl(&text),
            CatalogFormat::Csv => Catalog::parse_csv(&text),
        }
    }

    /// Parses JSONL text: one course object per line, blank lines ignored.
    pub fn parse_jsonl(text: &str) -> Result<Catalog, CatalogError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: CourseRecord = serde_json::from_str(line).map_err(|e| CatalogError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push((i + 1, record));
        }
        Catalog::from_numbered(records)
    }

    /// Parses CSV text with a header row. The optional `embedding` column holds
    /// a JSON array; an empty cell means "not embedded".
    pub fn parse_csv(text: &str) -> Result<Catalog, CatalogError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut records = Vec::new();
        for result in reader.deserialize::<CsvRow>() {
            let row = result.map_err(|e| CatalogError::Parse {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = records.len() + 2;
            let embedding = match row.embedding.as_deref().map(str::trim) {
                None | Some("") | Some("null") => None,
                Some(json) => {
                    let values: Vec<f64> = serde_json::from_str(json).map_err(|e| CatalogError::Parse {
                        line,
                        message: format!("embedding: {e}"),
                    })?;
                    Some(EmbeddingVector::new(values).map_err(|e| CatalogError::Parse {
                        line,
                        message: format!("embedding: {e}"),
                    })?)
                }
            };
            records.push((
                line,
                CourseRecord {
                    course_id: row.course_id,
                    level: row.level,
                    subject: row.subject,
                    title: row.title,
                    description: row.description.unwrap_or_default(),
                    embedding,
                },
            ));
        }
        Catalog::from_numbered(records)
    }

    /// Writes the catalog as JSONL, one course per line in catalog order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CatalogError> {
        let file = fs::File::create(path)?;
        let mut out = BufWriter::new(file);
        self.write_jsonl(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_jsonl(&self, out: &mut impl Write) -> Result<(), CatalogError> {
        for course in &self.courses {
            serde_json::to_writer(&mut *out, course).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}
