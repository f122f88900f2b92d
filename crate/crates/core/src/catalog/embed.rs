use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::{Catalog, CatalogError};
use crate::digest::sha256_hex;
use crate::embedding::EmbeddingVector;
use crate::provider::Provider;

#[derive(Debug, Clone, Copy)]
pub struct EmbedOptions<'a> {
    /// Maximum number of embedding requests in flight at once.
    pub batch_size: usize,
    pub cache: Option<&'a EmbeddingCache>,
}

impl Default for EmbedOptions<'_> {
    fn default() -> Self {
        Self {
            batch_size: 8,
            cache: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EmbedReport {
    /// Courses that already carried an embedding.
    pub skipped: usize,
    /// Courses filled from the cache.
    pub cached: usize,
    /// Courses embedded through the provider.
    pub embedded: usize,
    /// Courses whose embedding request failed.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    provider: String,
    model: String,
    text_digest: String,
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    provider: String,
    model: String,
    text_digest: String,
    embedding: EmbeddingVector,
}

/// Embeddings keyed by (provider id, model id, text digest).
///
/// A file-backed cache appends one JSON line per insertion, so progress made
/// before an interruption or a provider failure survives into the next run.
#[derive(Debug, Default)]
pub struct EmbeddingCache {
    entries: Mutex<HashMap<CacheKey, EmbeddingVector>>,
    file: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a JSONL cache file and loads its entries.
    /// A torn final line from an interrupted write is ignored.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let path = path.as_ref();
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheLine>(&line) {
                    Ok(entry) => {
                        entries.insert(
                            CacheKey {
                                provider: entry.provider,
                                model: entry.model,
                                text_digest: entry.text_digest,
                            },
                            entry.embedding,
                        );
                    }
                    Err(e) => tracing::warn!("skipping unreadable cache line: {e}"),
                }
            }
        } else if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        // Terminate a torn final line so the next append starts cleanly.
        if fs::read(path)?.last().is_some_and(|b| *b != b'\n') {
            writeln!(file)?;
        }
        Ok(Self {
            entries: Mutex::new(entries),
            file: Some(Mutex::new(file)),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn key(provider: &dyn Provider, text: &str) -> CacheKey {
        CacheKey {
            provider: provider.id().to_string(),
            model: provider.embedding_model().to_string(),
            text_digest: sha256_hex(text),
        }
    }

    pub fn get(&self, provider: &dyn Provider, text: &str) -> Option<EmbeddingVector> {
        self.entries
            .lock()
            .unwrap()
            .get(&Self::key(provider, text))
            .cloned()
    }

    pub fn insert(
        &self,
        provider: &dyn Provider,
        text: &str,
        embedding: &EmbeddingVector,
    ) -> Result<(), CatalogError> {
        let key = Self::key(provider, text);
        if let Some(file) = &self.file {
            let line = serde_json::to_string(&CacheLine {
                provider: key.provider.clone(),
                model: key.model.clone(),
                text_digest: key.text_digest.clone(),
                embedding: embedding.clone(),
            })
            .map_err(std::io::Error::from)?;
            let mut file = file.lock().unwrap();
            writeln!(file, "{line}")?;
            file.flush()?;
        }
        self.entries.lock().unwrap().insert(key, embedding.clone());
        Ok(())
    }
}

/// Embeds every course that lacks an embedding.
///
/// The description is embedded, or the title when the description is blank.
/// Already-embedded courses are skipped, so a second call makes no provider
/// requests. Up to `batch_size` requests run concurrently. A failing course
/// does not stop the others: every success is written into `catalog` (and the
/// cache, if any) before the first failure is returned.
pub async fn embed_catalog(
    catalog: &mut Catalog,
    provider: &dyn Provider,
    options: EmbedOptions<'_>,
) -> Result<EmbedReport, CatalogError> {
    if options.batch_size == 0 {
        return Err(CatalogError::InvalidBatchSize);
    }

    let mut report = EmbedReport::default();
    let mut pending = Vec::new();
    for (position, course) in catalog.courses.iter().enumerate() {
        if course.embedding.is_some() {
            report.skipped += 1;
            continue;
        }
        let text = course
            .embedding_text()
            .ok_or_else(|| CatalogError::EmptyCourse(course.course_id.clone()))?;
        pending.push((position, text.to_string()));
    }

    let mut to_request = Vec::new();
    for (position, text) in pending {
        match options.cache.and_then(|c| c.get(provider, &text)) {
            Some(embedding) => {
                catalog.set_embedding(position, embedding)?;
                report.cached += 1;
            }
            None => to_request.push((position, text)),
        }
    }

    let mut first_failure = None;
    let mut results = stream::iter(to_request)
        .map(|(position, text)| async move {
            let result = provider.embed(&text).await;
            (position, text, result)
        })
        .buffered(options.batch_size);

    while let Some((position, text, result)) = results.next().await {
        match result {
            Ok(embedding) => {
                if let Some(cache) = options.cache {
                    cache.insert(provider, &text, &embedding)?;
                }
                catalog.set_embedding(position, embedding)?;
                report.embedded += 1;
            }
            Err(source) => {
                let course_id = catalog.courses[position].course_id.clone();
                tracing::warn!(%course_id, error = %source, "embedding failed");
                report.failed += 1;
                first_failure.get_or_insert((course_id, source));
            }
        }
    }
    drop(results);
    catalog.refresh_digest();

    match first_failure {
        Some((course_id, source)) => Err(CatalogError::Provider {
            course_id,
            failed: report.failed,
            source,
        }),
        None => Ok(report),
    }
}
