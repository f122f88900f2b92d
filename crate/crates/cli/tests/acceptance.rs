//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test -p compass --test acceptance`.

use std::future::Future;
use std::io::Write;
use std::panic::AssertUnwindSafe;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use compass_core::catalog::{embed_catalog, EmbedOptions};
use compass_core::experiments::{
    bias_pairs, latency_bench, rank_likelihood, subject_embedding, subject_network, ExperimentOptions,
    LabeledQuery,
};
use compass_core::provider::{MockProvider, ProviderMode};
use compass_core::recommender::{parse_recommendations, ParseFailure, RecommendOptions, Stage};
use compass_core::synthetic::{
    embedded_catalog, random_unit_vectors, text_catalog, ALL_LEVELS, UNDERGRADUATE_LEVELS,
};
use compass_core::{
    cosine_similarity, Catalog, ChatRequest, ContextBundle, CourseRecord, EmbeddingVector, IdealDescription,
    LevelFilter, Provider, ProviderError, Recommender, RecommenderConfig, ScoredCourse, SimilarityIndex,
    StudentQuery,
};
use compass_service::{router, AppState};
use futures::FutureExt;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tokio::sync::{Notify, Semaphore};
use tower::ServiceExt;

/// Runs one criterion, prints its verdict, and propagates failure.
async fn criterion<F: Future<Output = ()>>(name: &str, body: F) {
    let started = Instant::now();
    let outcome = AssertUnwindSafe(body).catch_unwind().await;
    let verdict = if outcome.is_ok() { "PASS" } else { "FAIL" };
    // Written to the raw handle so the line shows even when output is captured.
    let _ = writeln!(
        std::io::stderr(),
        "{verdict} {name} ({:.2} s)",
        started.elapsed().as_secs_f64()
    );
    if let Err(panic) = outcome {
        std::panic::resume_unwind(panic);
    }
}

fn core_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core")
}

// ---------------------------------------------------------------------------
// Independent similarity oracle: normalize, sequential dot, clamp, full sort
// with catalog-position tie-break.

fn oracle_unit(v: &[f64]) -> Vec<f64> {
    let mut sq = 0.0;
    for x in v {
        sq += x * x;
    }
    let norm = sq.sqrt();
    v.iter().map(|x| x / norm).collect()
}

fn oracle_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

fn oracle_top_k(
    units: &[Vec<f64>],
    levels: &[u32],
    query: &[f64],
    k: usize,
    filter: LevelFilter,
) -> Vec<(usize, f64)> {
    let q = oracle_unit(query);
    let mut all: Vec<(usize, f64)> = units
        .iter()
        .enumerate()
        .filter(|(i, _)| filter.matches(levels[*i]))
        .map(|(i, u)| (i, oracle_dot(&q, u).clamp(-1.0, 1.0)))
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn index_over(vectors: &[EmbeddingVector], levels: &[u32]) -> SimilarityIndex {
    let ids: Vec<String> = (0..vectors.len()).map(|i| format!("C {i:05}")).collect();
    SimilarityIndex::from_entries(
        ids.into_iter()
            .zip(levels.iter().copied())
            .zip(vectors)
            .map(|((id, level), v)| (id, level, v)),
    )
    .unwrap()
}

#[tokio::test]
async fn ac01_top_k_matches_full_sort_oracle() {
    criterion(
        "top-k oracle equivalence (100 queries, N in {1000, 5000}, k in {1,10,50,N})",
        async {
            let dimension = 128;
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let mut search_time = Duration::ZERO;
            let mut checked = 0;
            for (n, queries) in [(1_000usize, 50usize), (5_000, 50)] {
                let mut vectors = random_unit_vectors(n, dimension, n as u64);
                // Exact duplicates force ties that only the position rule can break.
                for _ in 0..n / 20 {
                    let src = rng.gen_range(0..n);
                    let dst = rng.gen_range(0..n);
                    vectors[dst] = vectors[src].clone();
                }
                let levels: Vec<u32> = (0..n)
                    .map(|_| ALL_LEVELS[rng.gen_range(0..ALL_LEVELS.len())])
                    .collect();
                let index = index_over(&vectors, &levels);
                let units: Vec<Vec<f64>> = vectors.iter().map(|v| oracle_unit(v.values())).collect();
                let queries_vecs = random_unit_vectors(queries, dimension, 1000 + n as u64);
                for (qi, query) in queries_vecs.iter().enumerate() {
                    // Half of the queries duplicate a catalog vector to create ties at the top.
                    let query = if qi % 2 == 0 {
                        vectors[rng.gen_range(0..n)].clone()
                    } else {
                        query.clone()
                    };
                    let filter = if qi % 5 == 4 {
                        LevelFilter::range(300, 400).unwrap()
                    } else {
                        LevelFilter::All
                    };
                    for k in [1, 10, 50, n] {
                        let started = Instant::now();
                        let got = index.top_k(&query, k, filter).unwrap();
                        search_time += started.elapsed();
                        let want = oracle_top_k(&units, &levels, query.values(), k, filter);
                        assert_eq!(got.len(), want.len(), "N={n} k={k}");
                        for (rank, (g, (pos, score))) in got.iter().zip(&want).enumerate() {
                            assert_eq!(g.position, *pos, "N={n} k={k} rank {}", rank + 1);
                            assert_eq!(g.course_id, format!("C {pos:05}"));
                            assert_eq!(g.similarity, *score, "N={n} k={k} rank {}", rank + 1);
                            assert_eq!(g.rank, rank + 1);
                        }
                        checked += 1;
                    }
                }
            }
            assert_eq!(checked, 400);
            let _ = writeln!(
                std::io::stderr(),
                "  400 top_k calls: {:.1} ms",
                search_time.as_secs_f64() * 1e3
            );
            assert!(
                search_time < Duration::from_secs(1),
                "top_k total {search_time:?}"
            );
        },
    )
    .await;
}

#[tokio::test]
async fn ac02_cosine_kernel() {
    criterion("cosine kernel: identity, symmetry, scale invariance", async {
        let vectors = random_unit_vectors(300, 96, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // Non-unit inputs too.
        let raw: Vec<Vec<f64>> = vectors
            .iter()
            .map(|v| v.values().iter().map(|x| x * rng.gen_range(0.01..50.0)).collect())
            .collect();
        for (i, a) in raw.iter().enumerate() {
            assert!((cosine_similarity(a, a).unwrap() - 1.0).abs() <= 1e-9);
            let b = &raw[(i * 7 + 3) % raw.len()];
            let ab = cosine_similarity(a, b).unwrap();
            let ba = cosine_similarity(b, a).unwrap();
            assert!((ab - ba).abs() <= 1e-12);
            assert!((-1.0..=1.0).contains(&ab));
        }

        let levels = vec![100; vectors.len()];
        let index = index_over(&vectors, &levels);
        let ranking = |idx: &SimilarityIndex, q: &EmbeddingVector| -> Vec<String> {
            idx.top_k(q, idx.len(), LevelFilter::All)
                .unwrap()
                .into_iter()
                .map(|s| s.course_id)
                .collect()
        };
        for q in random_unit_vectors(20, 96, 6) {
            let base = ranking(&index, &q);
            for c in [1e-3, 1.0, 1e3] {
                assert_eq!(
                    ranking(&index, &q.scaled(c).unwrap()),
                    base,
                    "query scaled by {c}"
                );
                let scaled: Vec<EmbeddingVector> = vectors.iter().map(|v| v.scaled(c).unwrap()).collect();
                assert_eq!(
                    ranking(&index_over(&scaled, &levels), &q),
                    base,
                    "catalog scaled by {c}"
                );
            }
        }
    })
    .await;
}

#[tokio::test]
async fn ac03_subject_aggregation() {
    criterion(
        "subject aggregation: naive mean oracle (50 subjects), symmetric unit-diagonal network",
        async {
            let dimension = 48;
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut records = Vec::new();
            let mut members: Vec<Vec<Vec<f64>>> = Vec::new();
            for s in 0..50 {
                let count = rng.gen_range(1..12);
                let vectors = random_unit_vectors(count, dimension, 100 + s as u64);
                let mut raw = Vec::new();
                for (j, v) in vectors.into_iter().enumerate() {
                    let values: Vec<f64> = v.values().iter().map(|x| x * rng.gen_range(0.5..2.0)).collect();
                    raw.push(values.clone());
                    records.push(
                        CourseRecord::new(format!("S{s:02} {}", 100 + j), 100, format!("S{s:02}"), "t", "d")
                            .with_embedding(EmbeddingVector::new(values).unwrap()),
                    );
                }
                members.push(raw);
            }
            let catalog = Catalog::from_records(records).unwrap();
            let subjects: Vec<String> = (0..50).map(|s| format!("S{s:02}")).collect();
            for (s, raw) in members.iter().enumerate() {
                let mut mean = vec![0.0; dimension];
                for v in raw {
                    for (m, x) in mean.iter_mut().zip(v) {
                        *m += x;
                    }
                }
                let mean: Vec<f64> = mean.iter().map(|m| m / raw.len() as f64).collect();
                let want = oracle_unit(&mean);
                let got = subject_embedding(&catalog, &subjects[s]).unwrap();
                for (g, w) in got.values().iter().zip(&want) {
                    assert!((g - w).abs() <= 1e-12, "{}: {g} vs {w}", subjects[s]);
                }
            }

            let refs: Vec<&str> = subjects.iter().map(String::as_str).collect();
            let network = subject_network(&catalog, &refs).unwrap();
            assert_eq!(network.edges.len(), 50 * 49 / 2);
            let m = network.matrix();
            for i in 0..50 {
                assert!((m[i][i] - 1.0).abs() <= 1e-9);
                for j in 0..50 {
                    assert_eq!(m[i][j], m[j][i]);
                    assert!((-1.0..=1.0).contains(&m[i][j]));
                }
            }
        },
    )
    .await;
}

async fn mock_recommender(catalog: Catalog, mock: MockProvider) -> Recommender {
    let mut catalog = catalog;
    embed_catalog(&mut catalog, &mock, EmbedOptions::default())
        .await
        .unwrap();
    Recommender::new(Arc::new(catalog), Arc::new(mock), RecommenderConfig::default()).unwrap()
}

#[tokio::test]
async fn ac04_end_to_end_mock_pipeline() {
    criterion(
        "end-to-end mock pipeline: reproducible, 10 grounded, stages in order",
        async {
            let query = StudentQuery::new(
                "I want to understand how neural networks learn from data and where they fail",
                LevelFilter::All,
            )
            .unwrap();
            let mut responses = Vec::new();
            for _ in 0..2 {
                // A fresh catalog, embedding pass, and index per run.
                let recommender =
                    mock_recommender(text_catalog(200, 42, &ALL_LEVELS), MockProvider::new(9)).await;
                assert_eq!(recommender.catalog().len(), 200);
                responses.push(
                    recommender
                        .recommend(&query, &RecommendOptions::default())
                        .await
                        .unwrap(),
                );
            }
            let (mut a, b) = (responses[0].clone(), responses[1].clone());
            assert_eq!(a.recommendations.len(), 10);
            assert!(a.is_grounded());
            assert_eq!(a.context.courses.len(), 50);
            assert_eq!(
                a.stages,
                [
                    Stage::IdealDescription,
                    Stage::Embedding,
                    Stage::Retrieval,
                    Stage::Recommendation
                ]
            );
            assert!(a.timing.retrieval <= a.timing.total);
            a.timing = b.timing.clone();
            assert_eq!(a, b);
            assert_eq!(
                serde_json::to_string(&a).unwrap(),
                serde_json::to_string(&b).unwrap()
            );
        },
    )
    .await;
}

const RANK_QUERIES: &[&str] = &[
    "I want to build robots that see the world",
    "How do governments make environmental policy?",
    "I love poetry and the history of the novel",
];

fn labeled(queries: &[&str]) -> Vec<LabeledQuery> {
    queries
        .iter()
        .enumerate()
        .map(|(i, q)| LabeledQuery {
            id: format!("q{i:02}"),
            query: StudentQuery::new(*q, LevelFilter::All).unwrap(),
        })
        .collect()
}

#[tokio::test]
async fn ac05_rank_experiment_machinery() {
    criterion(
        "rank likelihood: deterministic profile, golden stochastic histogram, cumulative share",
        async {
            let deterministic =
                mock_recommender(text_catalog(300, 21, &ALL_LEVELS), MockProvider::new(0)).await;
            let exp = rank_likelihood(
                &deterministic,
                &labeled(RANK_QUERIES),
                5,
                &ExperimentOptions::default(),
            )
            .await
            .unwrap();
            assert!(exp.failures.is_empty());
            for likelihood in [&exp.pooled, &exp.per_query_mean] {
                assert_eq!(likelihood.k, 50);
                assert_eq!(likelihood.per_rank.len(), 50);
                assert!(likelihood.per_rank[..10].iter().all(|p| *p == 1.0));
                assert!(likelihood.per_rank[10..].iter().all(|p| *p == 0.0));
                let share = &likelihood.cumulative_share;
                assert!(share.windows(2).all(|w| w[0] <= w[1]));
                assert_eq!(share[9], 1.0);
                assert_eq!(share[49], 1.0);
            }

            let stochastic =
                mock_recommender(text_catalog(300, 21, &ALL_LEVELS), MockProvider::stochastic(1)).await;
            let options = ExperimentOptions {
                seed: 17,
                concurrency: 3,
                k: None,
            };
            let exp = rank_likelihood(&stochastic, &labeled(&RANK_QUERIES[..2]), 10, &options)
                .await
                .unwrap();
            let golden: Vec<usize> = serde_json::from_str(
                &std::fs::read_to_string(core_dir().join("tests/fixtures/stochastic_rank_counts.json"))
                    .unwrap(),
            )
            .unwrap();
            assert_eq!(exp.per_query[0].rank_counts[..25], golden[..]);
            assert!((exp.pooled.cumulative_share[49] - 1.0).abs() < 1e-12);
            assert!(exp.pooled.cumulative_share.windows(2).all(|w| w[0] <= w[1]));
        },
    )
    .await;
}

#[tokio::test]
async fn ac06_bias_null_case() {
    criterion(
        "bias null case: identical rate maps over 100 trials, all deltas 0",
        async {
            let catalog = Catalog::load(
                core_dir().join("data/sample_catalog.jsonl"),
                compass_core::CatalogFormat::Jsonl,
            )
            .unwrap();
            let recommender = mock_recommender(catalog, MockProvider::new(0)).await;
            let report = bias_pairs(
                &recommender,
                "I am a {} interested in machine learning. What courses should I take?",
                "descriptor",
                "man",
                "woman",
                100,
                LevelFilter::All,
                &ExperimentOptions::default(),
            )
            .await
            .unwrap();
            assert_eq!((report.successful_a, report.successful_b), (100, 100));
            assert_eq!(report.rates.len(), 10);
            for (course, pair) in &report.rates {
                assert_eq!(pair.rate_a, pair.rate_b, "{course}");
                assert_eq!(pair.delta(), 0.0, "{course}");
            }
            assert_eq!(report.max_abs_delta(), 0.0);
        },
    )
    .await;
}

fn fixture_context() -> ContextBundle {
    let spec: Value = serde_json::from_str(
        &std::fs::read_to_string(core_dir().join("tests/fixtures/parser/context.json")).unwrap(),
    )
    .unwrap();
    ContextBundle {
        ideal: IdealDescription {
            text: String::new(),
            source_query_digest: String::new(),
        },
        courses: spec["context_ids"]
            .as_array()
            .unwrap()
            .iter()
            .enumerate()
            .map(|(i, id)| ScoredCourse {
                course_id: id.as_str().unwrap().to_string(),
                similarity: 1.0 - i as f64 * 0.01,
                rank: i + 1,
                position: i,
            })
            .collect(),
        context_text: String::new(),
    }
}

#[tokio::test]
async fn ac07_parser_robustness() {
    criterion(
        "parser robustness: fixture corpus, hallucinations dropped, zero blocks fail",
        async {
            let dir = core_dir().join("tests/fixtures/parser");
            let context = fixture_context();
            let mut names: Vec<String> = std::fs::read_dir(&dir)
                .unwrap()
                .filter_map(|e| {
                    let path = e.unwrap().path();
                    (path.extension()? == "md")
                        .then(|| path.file_stem().unwrap().to_string_lossy().into_owned())
                })
                .collect();
            names.sort();
            assert!(names.len() >= 12, "{} fixtures", names.len());
            let mut saw_hallucination = false;
            let mut saw_zero_blocks = false;
            for name in &names {
                let raw = std::fs::read_to_string(dir.join(format!("{name}.md"))).unwrap();
                let expected: Value =
                    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap())
                        .unwrap();
                let result = parse_recommendations(&raw, &context);
                match expected.get("error").and_then(Value::as_str) {
                    Some("NoBlocks") => {
                        assert!(
                            matches!(result, Err(ParseFailure::NoBlocks)),
                            "{name}: {result:?}"
                        );
                        saw_zero_blocks = true;
                    }
                    Some("NoGroundedBlocks") => {
                        assert!(
                            matches!(result, Err(ParseFailure::NoGroundedBlocks { .. })),
                            "{name}: {result:?}"
                        );
                        saw_hallucination = true;
                    }
                    Some(other) => panic!("{name}: unknown expected error {other}"),
                    None => {
                        let parsed = result.unwrap_or_else(|e| panic!("{name}: {e}"));
                        let got: Vec<(String, String)> = parsed
                            .recommendations
                            .iter()
                            .map(|r| (r.course_id.clone(), r.confidence.to_string()))
                            .collect();
                        let want: Vec<(String, String)> = expected["expected"]
                            .as_array()
                            .unwrap()
                            .iter()
                            .map(|w| {
                                (
                                    w["course_id"].as_str().unwrap().to_string(),
                                    w["confidence"].as_str().unwrap().to_string(),
                                )
                            })
                            .collect();
                        assert_eq!(got, want, "{name}");
                        assert!(parsed
                            .recommendations
                            .iter()
                            .all(|r| context.contains(&r.course_id)));
                        assert!(parsed.recommendations.len() <= 10);
                        assert_eq!(
                            parsed.warnings.len(),
                            expected["warnings"].as_u64().unwrap() as usize,
                            "{name}"
                        );
                        if name.contains("hallucinated") {
                            assert!(!parsed.warnings.is_empty(), "{name}: dropped ids are reported");
                            saw_hallucination = true;
                        }
                    }
                }
            }
            assert!(saw_hallucination && saw_zero_blocks);
        },
    )
    .await;
}

#[tokio::test]
async fn ac08_retrieval_performance_budget() {
    criterion(
        "retrieval budget: 10,000 x 1536 scan < 150 ms per query; retrieval <= total per row",
        async {
            let catalog = embedded_catalog(10_000, 1536, 8, &ALL_LEVELS);
            let index = compass_core::build_index(&catalog).unwrap();
            let mut worst = Duration::ZERO;
            for q in random_unit_vectors(10, 1536, 99) {
                for filter in LevelFilter::standard_buckets() {
                    let started = Instant::now();
                    let top = index.top_k(&q, 50, filter).unwrap();
                    worst = worst.max(started.elapsed());
                    assert_eq!(top.len(), 50);
                }
            }
            let _ = writeln!(
                std::io::stderr(),
                "  slowest 10k x 1536 top-50 scan: {:.1} ms",
                worst.as_secs_f64() * 1e3
            );
            assert!(worst < Duration::from_millis(150), "slowest query {worst:?}");

            let recommender = Recommender::new(
                Arc::new(catalog),
                Arc::new(MockProvider::new(0)),
                RecommenderConfig::default(),
            )
            .unwrap();
            let rows = latency_bench(
                &recommender,
                "I want to learn how machine learning models are trained and evaluated",
                &LevelFilter::standard_buckets(),
                3,
                &ExperimentOptions::default(),
            )
            .await
            .unwrap();
            assert_eq!(rows.len(), 4);
            for row in &rows {
                assert!(row.failures.is_empty());
                assert!(row.mean_search <= row.mean_retrieval, "{row:?}");
                assert!(row.mean_retrieval <= row.mean_total, "{row:?}");
                assert!(row.mean_search < Duration::from_millis(150), "{row:?}");
            }
        },
    )
    .await;
}

/// Mock provider whose chat calls wait until the gate opens.
struct Gated {
    inner: MockProvider,
    gate: Semaphore,
    entered: AtomicUsize,
    arrived: Notify,
}

#[async_trait]
impl Provider for Gated {
    fn id(&self) -> &str {
        "gated"
    }
    fn mode(&self) -> ProviderMode {
        ProviderMode::Mock
    }
    fn embedding_model(&self) -> &str {
        self.inner.embedding_model()
    }
    async fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        self.entered.fetch_add(1, Ordering::SeqCst);
        self.arrived.notify_waiters();
        self.gate.acquire().await.unwrap().forget();
        self.inner.chat(request).await
    }
    async fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        self.inner.embed(text).await
    }
}

async fn call(app: &axum::Router, request: Request<Body>) -> (StatusCode, Value) {
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn recommend(body: Value) -> Request<Body> {
    Request::post("/api/recommend")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn assert_grounded(body: &Value) {
    let context: Vec<&Value> = body["context"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| &c["course_id"])
        .collect();
    let recs = body["recommendations"].as_array().unwrap();
    assert_eq!(recs.len(), 10);
    assert!(recs.iter().all(|r| context.contains(&&r["course_id"])));
}

#[tokio::test]
async fn ac09_service_contract() {
    criterion(
        "service contract: 200/400/404/422, grounded 200s, exactly one 503 over the cap",
        async {
            let mut catalog = text_catalog(200, 5, &UNDERGRADUATE_LEVELS);
            let mock = MockProvider::new(0);
            embed_catalog(&mut catalog, &mock, EmbedOptions::default())
                .await
                .unwrap();
            let known = catalog.courses()[0].course_id.clone();
            let catalog = Arc::new(catalog);

            let plain =
                Recommender::new(catalog.clone(), Arc::new(mock), RecommenderConfig::default()).unwrap();
            let app = router(AppState::new(Arc::new(plain), 4, Duration::from_secs(30)));
            let query = "Which courses cover algorithms, data structures, and software design?";

            let (status, body) = call(&app, recommend(json!({ "query": query }))).await;
            assert_eq!(status, StatusCode::OK);
            assert_grounded(&body);
            for levels in ["100-200", "300-400"] {
                let (status, body) = call(&app, recommend(json!({ "query": query, "levels": levels }))).await;
                assert_eq!(status, StatusCode::OK);
                assert_grounded(&body);
            }
            for bad in [
                json!({ "levels": "all" }),
                json!({ "query": "" }),
                json!({ "query": query, "levels": "200+" }),
            ] {
                assert_eq!(call(&app, recommend(bad)).await.0, StatusCode::BAD_REQUEST);
            }
            let (status, body) = call(&app, recommend(json!({ "query": query, "levels": "500+" }))).await;
            assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
            assert!(!body["message"].as_str().unwrap().is_empty());
            let uri = format!("/api/courses/{}", known.replace(' ', "%20"));
            let (status, body) = call(&app, Request::get(uri).body(Body::empty()).unwrap()).await;
            assert_eq!(status, StatusCode::OK);
            assert_eq!(body["course_id"], json!(known));
            let (status, _) = call(
                &app,
                Request::get("/api/courses/NOPE%20100")
                    .body(Body::empty())
                    .unwrap(),
            )
            .await;
            assert_eq!(status, StatusCode::NOT_FOUND);

            // Concurrency cap: cap + 1 simultaneous requests, exactly one 503.
            let cap = 3;
            let gated = Arc::new(Gated {
                inner: MockProvider::new(0),
                gate: Semaphore::new(0),
                entered: AtomicUsize::new(0),
                arrived: Notify::new(),
            });
            let capped = Recommender::new(catalog, gated.clone(), RecommenderConfig::default()).unwrap();
            let app = router(AppState::new(Arc::new(capped), cap, Duration::from_secs(30)));
            let mut handles = Vec::new();
            for i in 0..cap {
                let app = app.clone();
                handles.push(tokio::spawn(async move {
                    call(&app, recommend(json!({ "query": format!("{query} ({i})") }))).await
                }));
            }
            tokio::time::timeout(Duration::from_secs(10), async {
                loop {
                    let notified = gated.arrived.notified();
                    if gated.entered.load(Ordering::SeqCst) >= cap {
                        break;
                    }
                    notified.await;
                }
            })
            .await
            .expect("capped requests reach the provider");
            let extra = call(&app, recommend(json!({ "query": query }))).await;
            gated.gate.add_permits(1_000);
            let mut statuses = vec![extra.0];
            for handle in handles {
                let (status, body) = handle.await.unwrap();
                if status == StatusCode::OK {
                    assert_grounded(&body);
                }
                statuses.push(status);
            }
            assert_eq!(
                statuses
                    .iter()
                    .filter(|s| **s == StatusCode::SERVICE_UNAVAILABLE)
                    .count(),
                1,
                "{statuses:?}"
            );
            assert_eq!(
                statuses.iter().filter(|s| **s == StatusCode::OK).count(),
                cap,
                "{statuses:?}"
            );
        },
    )
    .await;
}
