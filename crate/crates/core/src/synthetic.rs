//! Seeded synthetic catalogs for tests, benchmarks, and demos.
//!
//! Two flavors:
//! - [`text_catalog`]: topical titles and descriptions drawn from per-subject
//!   vocabularies, no embeddings. Embedding it with the mock provider gives a
//!   corpus where same-subject courses cluster.
//! - [`embedded_catalog`]: random unit embeddings of any dimension, for
//!   exercising the similarity index at scale.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{Catalog, CourseRecord};
use crate::embedding::{l2_norm, EmbeddingVector};

pub const UNDERGRADUATE_LEVELS: [u32; 4] = [100, 200, 300, 400];
pub const ALL_LEVELS: [u32; 6] = [100, 200, 300, 400, 500, 600];

const SUBJECTS: &[(&str, &[&str])] = &[
    (
        "EECS",
        &[
            "algorithms",
            "computation",
            "complexity",
            "programming",
            "software",
            "compilers",
            "networks",
            "machine learning",
            "neural networks",
            "robotics",
            "computer vision",
            "databases",
            "security",
            "circuits",
            "signal processing",
            "operating systems",
        ],
    ),
    (
        "MATH",
        &[
            "calculus",
            "linear algebra",
            "topology",
            "combinatorics",
            "proofs",
            "probability",
            "number theory",
            "differential equations",
            "real analysis",
            "geometry",
            "abstract algebra",
            "graph theory",
        ],
    ),
    (
        "STATS",
        &[
            "regression",
            "statistical inference",
            "sampling",
            "bayesian modeling",
            "data analysis",
            "data visualization",
            "estimation",
            "experimental design",
            "time series",
            "statistical computing",
        ],
    ),
    (
        "POLSCI",
        &[
            "government",
            "elections",
            "public policy",
            "democracy",
            "institutions",
            "international relations",
            "constitutional law",
            "voting behavior",
            "political theory",
            "legislatures",
        ],
    ),
    (
        "ENVIRON",
        &[
            "climate change",
            "sustainability",
            "ecosystems",
            "conservation",
            "renewable energy",
            "pollution",
            "water resources",
            "environmental justice",
            "land use",
            "biodiversity",
        ],
    ),
    (
        "HISTORY",
        &[
            "empires",
            "revolutions",
            "warfare",
            "medieval europe",
            "colonialism",
            "modern china",
            "archives",
            "historical memory",
            "slavery",
            "industrialization",
        ],
    ),
    (
        "ENGLISH",
        &[
            "literature",
            "poetry",
            "the novel",
            "fiction writing",
            "rhetoric",
            "narrative",
            "drama",
            "shakespeare",
            "literary criticism",
            "memoir",
        ],
    ),
    (
        "PHYSICS",
        &[
            "mechanics",
            "quantum mechanics",
            "relativity",
            "thermodynamics",
            "electromagnetism",
            "optics",
            "particle physics",
            "condensed matter",
            "astrophysics",
            "cosmology",
        ],
    ),
    (
        "BIOLOGY",
        &[
            "genetics",
            "evolution",
            "cell biology",
            "ecology",
            "molecular biology",
            "physiology",
            "neuroscience",
            "microbiology",
            "immunology",
            "developmental biology",
        ],
    ),
    (
        "ECON",
        &[
            "markets",
            "microeconomics",
            "macroeconomics",
            "international trade",
            "finance",
            "incentives",
            "labor economics",
            "game theory",
            "econometrics",
            "monetary policy",
        ],
    ),
    (
        "PSYCH",
        &[
            "cognition",
            "behavior",
            "memory",
            "perception",
            "child development",
            "personality",
            "emotion",
            "social psychology",
            "clinical psychology",
            "decision making",
        ],
    ),
    (
        "PHIL",
        &[
            "ethics",
            "logic",
            "metaphysics",
            "epistemology",
            "philosophy of mind",
            "justice",
            "aesthetics",
            "free will",
            "philosophy of science",
            "existentialism",
        ],
    ),
];

const TITLE_PREFIXES: &[&str] = &[
    "Introduction to",
    "Topics in",
    "Advanced",
    "Seminar in",
    "Foundations of",
    "Methods in",
];

/// Subject codes used by the generator, in order.
pub fn subject_codes() -> Vec<&'static str> {
    SUBJECTS.iter().map(|(code, _)| *code).collect()
}

fn title_case(text: &str) -> String {
    text.split(' ')
        .map(|w| {
            let mut chars = w.chars();
            match chars.next() {
                Some(c) => c.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

struct IdAllocator {
    used: HashMap<(String, u32), u32>,
}

impl IdAllocator {
    fn next(&mut self, subject: &str, level: u32) -> String {
        let counter = self.used.entry((subject.to_string(), level)).or_insert(0);
        let n = *counter;
        *counter += 1;
        if n < 100 {
            format!("{subject} {}", level + n)
        } else {
            format!("{subject} {level}-{n}")
        }
    }
}

/// `count` courses with topical text and no embeddings. Subjects rotate so
/// every subject is represented once `count >= 12`; levels are drawn from
/// `levels`.
pub fn text_catalog(count: usize, seed: u64, levels: &[u32]) -> Catalog {
    assert!(!levels.is_empty(), "at least one level is required");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = IdAllocator { used: HashMap::new() };
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let (subject, vocab) = SUBJECTS[i % SUBJECTS.len()];
        let (_, other_vocab) = SUBJECTS[(i + 1 + rng.gen_range(0..SUBJECTS.len() - 1)) % SUBJECTS.len()];
        let level = levels[rng.gen_range(0..levels.len())];
        let mut topics: Vec<&str> = vocab.choose_multiple(&mut rng, 5).copied().collect();
        let borrowed = *other_vocab.choose(&mut rng).expect("vocabulary is non-empty");
        let prefix = TITLE_PREFIXES.choose(&mut rng).expect("prefixes are non-empty");
        let title = format!("{prefix} {}", title_case(topics[0]));
        topics.shuffle(&mut rng);
        let description = format!(
            "This course covers {}, {}, and {}. Emphasis is placed on {} and {}, with applications to {}.",
            topics[0], topics[1], topics[2], topics[3], topics[4], borrowed
        );
        records.push(CourseRecord::new(
            ids.next(subject, level),
            level,
            subject,
            title,
            description,
        ));
    }
    Catalog::from_records(records).expect("generated records are valid")
}

/// `count` random unit vectors of the given dimension.
pub fn random_unit_vectors(count: usize, dimension: usize, seed: u64) -> Vec<EmbeddingVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_unit_vector(&mut rng, dimension))
        .collect()
}

pub(crate) fn random_unit_vector(rng: &mut impl Rng, dimension: usize) -> EmbeddingVector {
    loop {
        let values: Vec<f64> = (0..dimension).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = l2_norm(&values);
        if norm > 1e-6 {
            return EmbeddingVector::new(values.into_iter().map(|v| v / norm).collect())
                .expect("normalized non-zero vector");
        }
    }
}

/// `count` courses with short generated text and random unit embeddings.
pub fn embedded_catalog(count: usize, dimension: usize, seed: u64, levels: &[u32]) -> Catalog {
    assert!(!levels.is_empty(), "at least one level is required");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let codes = subject_codes();
    let records = (0..count)
        .map(|i| {
            let subject = codes[i % codes.len()];
            let level = levels[rng.gen_range(0..levels.len())];
            CourseRecord::new(
                format!("{subject} {}{:05}", level / 100, i),
                level,
                subject,
                format!("Synthetic Course {i}"),
                format!("Generated course number {i} in {subject}."),
            )
            .with_embedding(random_unit_vector(&mut rng, dimension))
        })
        .collect();
    Catalog::from_records(records).expect("generated records are valid")
}
