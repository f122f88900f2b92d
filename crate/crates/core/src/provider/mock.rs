use std::sync::atomic::{AtomicUsize, Ordering};

use async_trait::async_trait;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{ChatRequest, Provider, ProviderError, ProviderMode, Role};
use crate::digest::seed_from_parts;
use crate::embedding::{l2_norm, EmbeddingVector, DEFAULT_DIMENSION};
use crate::recommender::prompts::{CONTEXT_CLOSE, CONTEXT_OPEN, QUERY_CLOSE, QUERY_OPEN};

/// Self-descriptors the mock ignores when writing idealized descriptions, so
/// paired queries that differ only in one of them produce identical pipelines.
pub const DEMOGRAPHIC_TERMS: &[&str] = &[
    "man",
    "woman",
    "men",
    "women",
    "male",
    "female",
    "boy",
    "girl",
    "white",
    "black",
    "asian",
    "hispanic",
    "latino",
    "latina",
    "gay",
    "straight",
    "lesbian",
    "bisexual",
    "transgender",
    "nonbinary",
];

/// Function words and catalog boilerplate. Excluded from the mock's lexical
/// embedding so that topical words dominate similarity.
const STOPWORDS: &[&str] = &[
    "a",
    "about",
    "above",
    "after",
    "all",
    "also",
    "am",
    "an",
    "and",
    "any",
    "are",
    "as",
    "at",
    "be",
    "been",
    "being",
    "both",
    "but",
    "by",
    "can",
    "could",
    "do",
    "does",
    "each",
    "for",
    "from",
    "get",
    "had",
    "has",
    "have",
    "how",
    "i",
    "if",
    "in",
    "into",
    "is",
    "it",
    "its",
    "just",
    "like",
    "me",
    "more",
    "most",
    "my",
    "no",
    "not",
    "of",
    "on",
    "one",
    "or",
    "other",
    "our",
    "out",
    "over",
    "should",
    "so",
    "some",
    "such",
    "than",
    "that",
    "the",
    "their",
    "them",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "through",
    "to",
    "too",
    "up",
    "us",
    "very",
    "was",
    "we",
    "were",
    "what",
    "when",
    "where",
    "which",
    "while",
    "who",
    "why",
    "will",
    "with",
    "would",
    "you",
    "your",
    "want",
    "wants",
    "learn",
    "learning",
    "take",
    "taking",
    "interested",
    "interest",
    "interests",
    "looking",
    "courses",
    "course",
    "class",
    "classes",
    "student",
    "students",
    "major",
    "minor",
    "year",
    "need",
    "help",
    "really",
    "things",
    "thing",
    "stuff",
    "something",
    "topics",
    "topic",
    "include",
    "includes",
    "including",
    "introduction",
    "introduces",
    "introductory",
    "study",
    "studies",
    "concepts",
    "methods",
    "principles",
    "skills",
    "emphasis",
    "emphasizes",
    "emphasized",
    "foundations",
    "foundational",
    "examines",
    "examine",
    "explores",
    "explore",
    "surveys",
    "survey",
    "covers",
    "covered",
    "areas",
    "area",
    "field",
    "fields",
    "related",
    "current",
    "core",
    "build",
    "develop",
    "developing",
    "apply",
    "applied",
    "applications",
    "application",
    "practical",
    "advanced",
    "research",
    "problems",
    "projects",
    "project",
    "readings",
    "lectures",
    "work",
    "use",
    "using",
    "based",
    "understanding",
    "understand",
    "well",
    "new",
    "passionate",
    "fascinated",
    "curious",
    "love",
    "enjoy",
    "i'm",
    "im",
    "focus",
];

fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&word)
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

fn stem(word: &str) -> &str {
    if word.len() > 4 && word.ends_with('s') && !word.ends_with("ss") {
        &word[..word.len() - 1]
    } else {
        word
    }
}

fn between<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let end = text[start..].find(close)? + start;
    Some(&text[start..end])
}

fn join_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} and {b}"),
        [rest @ .., last] => format!("{}, and {last}", rest.join(", ")),
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockBehavior {
    /// Recommends the first ten courses of the context, in context order.
    Deterministic,
    /// Draws ten courses without replacement from the first `pool` context
    /// entries, weighting rank r by 1/r. The draw is seeded by the mock seed,
    /// the request seed, and the prompt text.
    Stochastic { pool: usize },
}

/// Offline provider with reproducible outputs.
///
/// - Embeddings: a sparse signed hash of each content word plus a small dense
///   component seeded by a digest of the whole text, normalized to unit
///   length. Identical text yields an identical vector; texts sharing topical
///   words land close together.
/// - Stage-one prompts (no course context block): a catalog-style course
///   description built from the query's content words.
/// - Stage-two prompts: markdown recommending context courses (see
///   [`MockBehavior`]), confidence cycling High, Medium, Low.
#[derive(Debug)]
pub struct MockProvider {
    seed: u64,
    dimension: usize,
    behavior: MockBehavior,
    blind_terms: Vec<String>,
    chat_calls: AtomicUsize,
    embed_calls: AtomicUsize,
}

const LEXICAL_HASHES_PER_WORD: usize = 8;
const DENSE_FRACTION: f64 = 0.2;
const RECOMMENDATIONS: usize = 10;

impl MockProvider {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            dimension: DEFAULT_DIMENSION,
            behavior: MockBehavior::Deterministic,
            blind_terms: DEMOGRAPHIC_TERMS.iter().map(|s| s.to_string()).collect(),
            chat_calls: AtomicUsize::new(0),
            embed_calls: AtomicUsize::new(0),
        }
    }

    /// Stochastic stage-two behavior over the top 25 context courses.
    pub fn stochastic(seed: u64) -> Self {
        Self::new(seed).with_behavior(MockBehavior::Stochastic { pool: 25 })
    }

    pub fn with_dimension(mut self, dimension: usize) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        self.dimension = dimension;
        self
    }

    pub fn with_behavior(mut self, behavior: MockBehavior) -> Self {
        self.behavior = behavior;
        self
    }

    /// Replaces the list of words ignored by stage one.
    pub fn with_blind_terms<I, S>(mut self, terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.blind_terms = terms.into_iter().map(Into::into).collect();
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn chat_calls(&self) -> usize {
        self.chat_calls.load(Ordering::Relaxed)
    }

    pub fn embed_calls(&self) -> usize {
        self.embed_calls.load(Ordering::Relaxed)
    }

    fn keywords(&self, text: &str) -> Vec<String> {
        let mut seen = Vec::new();
        for word in words(text) {
            if word.len() < 3
                || word.chars().all(|c| c.is_ascii_digit())
                || is_stopword(&word)
                || self.blind_terms.iter().any(|t| t == &word)
                || seen.contains(&word)
            {
                continue;
            }
            seen.push(word);
        }
        seen
    }

    /// The stage-one answer for a raw query.
    pub fn ideal_description(&self, query: &str) -> String {
        let mut keywords = self.keywords(query);
        keywords.truncate(8);
        if keywords.is_empty() {
            keywords = vec!["interdisciplinary".into(), "inquiry".into()];
        }
        let focus = join_list(&keywords[..keywords.len().min(3)]);
        let all = join_list(&keywords);
        let first = &keywords[0];
        let title = match keywords.get(1) {
            Some(second) => format!("{} and {}", capitalize(first), capitalize(second)),
            None => capitalize(first),
        };
        format!(
            "{title}. This course introduces {all}. Students study the central ideas, \
             methods, and open questions of {focus}, moving from foundational principles \
             to contemporary applications. Topics include {all}, with attention to how \
             {first} connects to neighboring disciplines. Through lectures, readings, \
             problem sets, and a final project, students build working skills in {focus} \
             and learn to evaluate evidence, communicate results, and apply {first} to \
             concrete problems. The course prepares students for advanced coursework and \
             research in {focus}. Assessment combines written work, collaborative discussion, \
             and independent study, and no background beyond introductory coursework is assumed."
        )
    }

    /// The embedding of `text`, computed synchronously.
    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyText);
        }
        let dim = self.dimension;
        let mut lexical = vec![0.0f64; dim];
        for word in words(text).filter(|w| !is_stopword(w)) {
            let token = stem(&word);
            let mut hasher = Sha256::new();
            hasher.update(self.seed.to_le_bytes());
            hasher.update(token.as_bytes());
            let digest = hasher.finalize();
            for chunk in digest.chunks_exact(4).take(LEXICAL_HASHES_PER_WORD) {
                let raw = u32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
                let slot = (raw >> 1) as usize % dim;
                lexical[slot] += if raw & 1 == 0 { 1.0 } else { -1.0 };
            }
        }

        let dense_seed = seed_from_parts(&[&self.seed.to_le_bytes(), b"dense", text.as_bytes()]);
        let mut rng = ChaCha8Rng::seed_from_u64(dense_seed);
        let dense: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dense_norm = l2_norm(&dense);
        let lexical_norm = l2_norm(&lexical);
        let dense_scale = if lexical_norm > 0.0 {
            DENSE_FRACTION * lexical_norm / dense_norm
        } else {
            1.0 / dense_norm
        };
        let combined: Vec<f64> = lexical
            .iter()
            .zip(&dense)
            .map(|(l, d)| l + d * dense_scale)
            .collect();
        let norm = l2_norm(&combined);
        EmbeddingVector::new(combined.into_iter().map(|v| v / norm).collect())
            .map_err(|e| ProviderError::MalformedResponse(e.to_string()))
    }

    fn recommend_from_context(&self, request: &ChatRequest, context: &str, query: &str) -> String {
        let entries: Vec<(&str, &str)> = context
            .trim_start_matches('\n')
            .split('\n')
            .collect::<Vec<_>>()
            .chunks(3)
            .filter_map(|chunk| chunk[0].split_once(": "))
            .collect();
        if entries.is_empty() {
            return "None of the provided courses fit this request.".into();
        }

        let picks: Vec<usize> = match self.behavior {
            MockBehavior::Deterministic => (0..entries.len().min(RECOMMENDATIONS)).collect(),
            MockBehavior::Stochastic { pool } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.request_seed(request));
                let mut remaining: Vec<usize> = (0..entries.len().min(pool.max(1))).collect();
                let mut picks = Vec::new();
                while picks.len() < RECOMMENDATIONS && !remaining.is_empty() {
                    let total: f64 = remaining.iter().map(|r| 1.0 / (*r as f64 + 1.0)).sum();
                    let mut target = rng.gen::<f64>() * total;
                    let mut chosen = remaining.len() - 1;
                    for (slot, rank) in remaining.iter().enumerate() {
                        target -= 1.0 / (*rank as f64 + 1.0);
                        if target < 0.0 {
                            chosen = slot;
                            break;
                        }
                    }
                    picks.push(remaining.remove(chosen));
                }
                picks
            }
        };

        let keywords = self.keywords(query);
        let mut out = String::from("Here are my recommendations, drawn only from the courses provided.\n\n");
        for (i, &pick) in picks.iter().enumerate() {
            let (course_id, title) = entries[pick];
            let interest = keywords
                .get(i % keywords.len().max(1))
                .map(String::as_str)
                .unwrap_or("your stated goals");
            let confidence = ["High", "Medium", "Low"][i % 3];
            out.push_str(&format!(
                "{}. **{course_id}: {title}**\n   - Rationale: {title} lines up with your interest in {interest}.\n   - Confidence: {confidence}\n\n",
                i + 1
            ));
        }
        out
    }

    fn request_seed(&self, request: &ChatRequest) -> u64 {
        let mut hasher = Sha256::new();
        for message in &request.messages {
            hasher.update(format!("{:?}", message.role).as_bytes());
            hasher.update((message.content.len() as u64).to_le_bytes());
            hasher.update(message.content.as_bytes());
        }
        let prompt_digest = hasher.finalize();
        seed_from_parts(&[
            &self.seed.to_le_bytes(),
            &request.seed.unwrap_or(0).to_le_bytes(),
            &prompt_digest,
        ])
    }
}

#[async_trait]
impl Provider for MockProvider {
    fn id(&self) -> &str {
        "mock"
    }

    fn mode(&self) -> ProviderMode {
        ProviderMode::Mock
    }

    fn embedding_model(&self) -> &str {
        "mock-lexical-hash"
    }

    async fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        request.validate()?;
        self.chat_calls.fetch_add(1, Ordering::Relaxed);
        let last_user = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or_default();
        let all_text: String = request
            .messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let query = between(&all_text, QUERY_OPEN, QUERY_CLOSE)
            .unwrap_or(last_user)
            .trim();
        match between(&all_text, CONTEXT_OPEN, CONTEXT_CLOSE) {
            Some(context) => Ok(self.recommend_from_context(request, context, query)),
            None => Ok(self.ideal_description(query)),
        }
    }

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        self.embed_calls.fetch_add(1, Ordering::Relaxed);
        self.embed_text(text)
    }
}
