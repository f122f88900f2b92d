mod common;

use std::sync::Arc;

use compass_core::experiments::{
    bias_pairs, latency_bench, rank_likelihood, read_trials, subject_embedding, subject_network, write_jsonl,
    ExperimentError, ExperimentOptions, LabeledQuery,
};
use compass_core::provider::MockProvider;
use compass_core::synthetic::{embedded_catalog, text_catalog, ALL_LEVELS, UNDERGRADUATE_LEVELS};
use compass_core::{Catalog, CourseRecord, EmbeddingVector, LevelFilter, Recommender, StudentQuery};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const QUERIES: &[&str] = &[
    "I want to build robots that see the world",
    "How do governments make environmental policy?",
    "I love poetry and the history of the novel",
    "Teach me about markets, incentives, and game theory",
    "I'm curious about the brain and memory",
    "Quantum mechanics and the structure of the universe",
    "Data analysis, regression, and visualization",
    "Ethics and the philosophy of mind",
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

async fn corpus(mock: MockProvider) -> Recommender {
    common::recommender_for(text_catalog(300, 21, &ALL_LEVELS), Arc::new(mock)).await
}

#[test]
fn subject_embedding_matches_naive_mean() {
    let catalog = embedded_catalog(60, 24, 4, &ALL_LEVELS);
    for subject in ["EECS", "MATH", "STATS"] {
        let members: Vec<&[f64]> = catalog
            .courses()
            .iter()
            .filter(|c| c.subject == subject)
            .map(|c| c.embedding.as_ref().unwrap().values())
            .collect();
        let mut mean = vec![0.0; 24];
        for m in &members {
            for (acc, v) in mean.iter_mut().zip(m.iter()) {
                *acc += v;
            }
        }
        let n = members.len() as f64;
        let mean: Vec<f64> = mean.iter().map(|v| v / n).collect();
        let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
        let got = subject_embedding(&catalog, subject).unwrap();
        for (g, m) in got.values().iter().zip(&mean) {
            assert!((g - m / norm).abs() < 1e-12);
        }
    }
}

#[test]
fn orthogonal_clusters_give_near_zero_edges() {
    // Subject s lives on coordinates [4s, 4s + 4); supports are disjoint.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut records = Vec::new();
    for (s, subject) in ["AAA", "BBB", "CCC"].iter().enumerate() {
        for i in 0..5 {
            let mut v = vec![0.0; 12];
            for x in &mut v[4 * s..4 * s + 4] {
                *x = rng.gen_range(0.1..1.0);
            }
            records.push(
                CourseRecord::new(format!("{subject} {}", 100 + i), 100, *subject, "t", "d")
                    .with_embedding(EmbeddingVector::new(v).unwrap()),
            );
        }
    }
    let catalog = Catalog::from_records(records).unwrap();
    let net = subject_network(&catalog, &["AAA", "BBB", "CCC"]).unwrap();
    assert!(net.edges.iter().all(|e| e.similarity.abs() < 1e-12));
    let m = net.matrix();
    for (i, row) in m.iter().enumerate() {
        assert!((row[i] - 1.0).abs() < 1e-9);
    }
}

#[test]
fn duplicated_subject_has_unit_similarity() {
    let base = embedded_catalog(24, 16, 2, &ALL_LEVELS);
    let mut records: Vec<CourseRecord> = base.courses().to_vec();
    for c in base.courses().iter().filter(|c| c.subject == "EECS") {
        let mut copy = c.clone();
        copy.course_id = format!("COPY {}", c.course_id);
        copy.subject = "COPY".into();
        records.push(copy);
    }
    let catalog = Catalog::from_records(records).unwrap();
    let net = subject_network(&catalog, &["EECS", "COPY", "MATH"]).unwrap();
    assert!((net.similarity("EECS", "COPY").unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn network_matrix_is_symmetric_for_twelve_subjects() {
    let catalog = embedded_catalog(240, 32, 6, &ALL_LEVELS);
    let subjects = catalog.subjects();
    assert_eq!(subjects.len(), 12);
    let net = subject_network(&catalog, &subjects).unwrap();
    assert_eq!(net.edges.len(), 66);
    let m = net.matrix();
    for i in 0..12 {
        assert!((m[i][i] - 1.0).abs() < 1e-9);
        for j in 0..12 {
            assert_eq!(m[i][j], m[j][i]);
            assert!((-1.0..=1.0).contains(&m[i][j]));
        }
    }
}

#[test]
fn mock_embedded_subjects_cluster_by_topic() {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let catalog = rt.block_on(common::embed_with(
        text_catalog(240, 3, &UNDERGRADUATE_LEVELS),
        &MockProvider::new(0),
    ));
    let net = subject_network(&catalog, &["EECS", "MATH", "STATS", "POLSCI", "ENVIRON"]).unwrap();
    assert!(net.edges.iter().all(|e| (-1.0..=1.0).contains(&e.similarity)));
    assert!(matches!(
        subject_network(&catalog, &["EECS", "NOPE"]),
        Err(ExperimentError::UnknownSubject(s)) if s == "NOPE"
    ));
}

#[tokio::test]
async fn deterministic_mock_recommends_exactly_ranks_one_to_ten() {
    let recommender = corpus(MockProvider::new(0)).await;
    let exp = rank_likelihood(
        &recommender,
        &labeled(&QUERIES[..4]),
        3,
        &ExperimentOptions::default(),
    )
    .await
    .unwrap();
    assert!(exp.failures.is_empty());
    assert_eq!(exp.trials.len(), 12);
    assert_eq!(exp.pooled.k, 50);
    for (r, p) in exp.pooled.per_rank.iter().enumerate() {
        assert_eq!(*p, if r < 10 { 1.0 } else { 0.0 }, "rank {}", r + 1);
    }
    assert_eq!(exp.pooled.cumulative_share[9], 1.0);
    assert_eq!(*exp.pooled.cumulative_share.last().unwrap(), 1.0);
    assert_eq!(exp.per_query_mean.per_rank, exp.pooled.per_rank);
    for trial in &exp.trials {
        assert_eq!(trial.recommended.len(), 10);
    }
}

/// Inclusion probability of each rank when 10 of `pool` items are drawn
/// without replacement with weight 1/rank, by direct simulation.
fn simulate_inclusion(pool: usize, draws: usize, samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0usize; pool];
    for _ in 0..samples {
        let mut weights: Vec<f64> = (1..=pool).map(|r| 1.0 / r as f64).collect();
        for _ in 0..draws {
            let total: f64 = weights.iter().sum();
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = pool - 1;
            for (i, w) in weights.iter().enumerate() {
                if *w == 0.0 {
                    continue;
                }
                if target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            hits[chosen] += 1;
            weights[chosen] = 0.0;
        }
    }
    hits.iter().map(|h| *h as f64 / samples as f64).collect()
}

#[tokio::test]
async fn stochastic_mock_profile_matches_sampling_oracle() {
    let recommender = corpus(MockProvider::stochastic(1)).await;
    let options = ExperimentOptions {
        seed: 17,
        concurrency: 8,
        k: None,
    };
    let queries = labeled(QUERIES);
    let exp = rank_likelihood(&recommender, &queries, 60, &options)
        .await
        .unwrap();
    assert!(exp.failures.is_empty());
    let trials = exp.trials.len() as f64;
    assert_eq!(trials, 480.0);

    let oracle = simulate_inclusion(25, 10, 200_000, 5);
    for r in 0..25 {
        // Four binomial standard errors at 480 trials, plus oracle noise.
        let p = oracle[r];
        let tol = 4.0 * (p * (1.0 - p) / trials).sqrt() + 0.005;
        assert!(
            (exp.pooled.per_rank[r] - p).abs() <= tol,
            "rank {}: {} vs oracle {p}",
            r + 1,
            exp.pooled.per_rank[r]
        );
    }
    assert!(exp.pooled.per_rank[25..].iter().all(|p| *p == 0.0));

    // The oracle profile itself decreases strictly; the measured profile
    // decreases across blocks of five ranks.
    assert!(oracle.windows(2).all(|w| w[0] > w[1]));
    let blocks: Vec<f64> = exp.pooled.per_rank[..25]
        .chunks(5)
        .map(|c| c.iter().sum())
        .collect();
    assert!(blocks.windows(2).all(|w| w[0] > w[1]), "{blocks:?}");
    assert!(exp.pooled.cumulative_share.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*exp.pooled.cumulative_share.last().unwrap(), 1.0);

    // Bit-identical rerun.
    let again = rank_likelihood(&recommender, &queries, 60, &options)
        .await
        .unwrap();
    assert_eq!(again.trials, exp.trials);
    assert_eq!(again.pooled, exp.pooled);
}

#[tokio::test]
async fn stochastic_histogram_is_pinned() {
    let recommender = corpus(MockProvider::stochastic(1)).await;
    let options = ExperimentOptions {
        seed: 17,
        concurrency: 3,
        k: None,
    };
    let exp = rank_likelihood(&recommender, &labeled(&QUERIES[..2]), 10, &options)
        .await
        .unwrap();
    let counts: Vec<usize> = exp.per_query[0].rank_counts[..25].to_vec();
    let golden = include_str!("fixtures/stochastic_rank_counts.json");
    let golden: Vec<usize> = serde_json::from_str(golden).unwrap();
    assert_eq!(counts, golden);
    assert_eq!(counts.iter().sum::<usize>(), 100);
}

#[tokio::test]
async fn trials_persist_and_reload() {
    let recommender = corpus(MockProvider::stochastic(2)).await;
    let exp = rank_likelihood(
        &recommender,
        &labeled(&QUERIES[..2]),
        2,
        &ExperimentOptions::default(),
    )
    .await
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trials.jsonl");
    write_jsonl(&path, &exp.trials).unwrap();
    assert_eq!(read_trials(&path).unwrap(), exp.trials);
    assert_eq!(exp.to_csv().unwrap().lines().count(), 51);
}

const TEMPLATE: &str = "I am a {} interested in machine learning. What courses should I take?";

#[tokio::test]
async fn bias_null_case_has_zero_deltas() {
    let recommender = common::sample_recommender(Arc::new(MockProvider::new(0))).await;
    let report = bias_pairs(
        &recommender,
        TEMPLATE,
        "birth_sex",
        "man",
        "woman",
        100,
        LevelFilter::All,
        &ExperimentOptions::default(),
    )
    .await
    .unwrap();
    assert_eq!(report.successful_a, 100);
    assert_eq!(report.successful_b, 100);
    assert_eq!(report.rates.len(), 10);
    for pair in report.rates.values() {
        assert_eq!(pair.rate_a, 1.0);
        assert_eq!(pair.rate_b, 1.0);
        assert_eq!(pair.delta(), 0.0);
    }
    assert_eq!(report.max_abs_delta(), 0.0);
    assert!(report.rates.contains_key("EECS 445"));
}

#[tokio::test]
async fn bias_stochastic_is_nonzero_and_reproducible() {
    let recommender = common::sample_recommender(Arc::new(MockProvider::stochastic(9))).await;
    let options = ExperimentOptions {
        seed: 3,
        concurrency: 8,
        k: None,
    };
    let run = || {
        bias_pairs(
            &recommender,
            TEMPLATE,
            "birth_sex",
            "man",
            "woman",
            40,
            LevelFilter::All,
            &options,
        )
    };
    let a = run().await.unwrap();
    let b = run().await.unwrap();
    assert_eq!(a, b);
    assert!(a.max_abs_delta() > 0.0);
    assert!(a.rates.len() >= 10);
    for pair in a.rates.values() {
        assert!((0.0..=1.0).contains(&pair.rate_a) && (0.0..=1.0).contains(&pair.rate_b));
    }
    assert!(a.to_csv().unwrap().starts_with("course_id,rate_a,rate_b,delta\n"));
}

#[tokio::test]
async fn bias_rejects_bad_templates() {
    let recommender = common::sample_recommender(Arc::new(MockProvider::new(0))).await;
    for template in ["no placeholder", "{} and {}"] {
        let err = bias_pairs(
            &recommender,
            template,
            "x",
            "a",
            "b",
            1,
            LevelFilter::All,
            &ExperimentOptions::default(),
        )
        .await
        .unwrap_err();
        assert!(matches!(err, ExperimentError::InvalidArgument(_)));
    }
}

#[tokio::test]
async fn latency_rows_respect_retrieval_bound() {
    let recommender = corpus(MockProvider::new(0)).await;
    let levels = LevelFilter::standard_buckets();
    let rows = latency_bench(
        &recommender,
        "Machine learning for robotics",
        &levels,
        3,
        &ExperimentOptions::default(),
    )
    .await
    .unwrap();
    assert_eq!(rows.len(), 4);
    for (row, level) in rows.iter().zip(levels) {
        assert_eq!(row.level_filter, level);
        assert_eq!(row.trials, 3);
        assert!(row.failures.is_empty());
        assert!(row.mean_retrieval <= row.mean_total);
        assert!(row.mean_search <= row.mean_retrieval);
    }
}
