//! Property tests for the module invariants: weight monotonicity and its
//! formula oracle, min-max normalization, cosine symmetry and scale
//! invariance, graph filter soundness on random corpora, vanguard branch
//! invariance under weight rescaling, rank-metric invariances, and
//! time-encoding injectivity.

use fame_core::corpus::{
    compute_impact_weight, normalize_weights, Corpus, ImpactSignals, MetricParams, PaperRecord,
};
use fame_core::embedding::{cosine_similarity, EmbeddingMatrix, EmbeddingStore};
use fame_core::eval::spearman;
use fame_core::graph::{assert_forward_in_time, build_graph, GraphConfig, MockVerifier};
use fame_core::manifold::{
    compute_neighborhood_medians, time_encode_normalized, TimeEncoderConfig, VanguardConfig,
};
use fame_core::rng::SeedRng;

use proptest::prelude::*;

fn signals_strategy() -> impl Strategy<Value = ImpactSignals> {
    (0.0..500.0f64, 0.0..500.0f64, 0.0..100.0f64, 0.0..300.0f64).prop_map(
        |(github_stars, citations, influential_citations, altmetric)| ImpactSignals {
            github_stars,
            citations,
            influential_citations,
            altmetric,
        },
    )
}

proptest! {
    #[test]
    fn impact_weight_is_monotone(signals in signals_strategy(), bump in 0.001..50.0f64, which in 0usize..4) {
        let params = MetricParams::default();
        let w0 = compute_impact_weight(&signals, &params);
        let mut s = signals;
        match which {
            0 => s.github_stars += bump,
            1 => s.citations += bump,
            2 => s.influential_citations += bump,
            _ => s.altmetric += bump,
        }
        prop_assert!(compute_impact_weight(&s, &params) > w0);
    }

    #[test]
    fn impact_weight_matches_independent_log_oracle(signals in signals_strategy()) {
        // Oracle: same formula through a different route (std log2 ratios
        // instead of libm natural-log ratios).
        let params = MetricParams::default();
        let got = compute_impact_weight(&signals, &params);
        let term = |s: f64, scale: f64, base: f64| (scale * s + 1.0).log2() / base.log2();
        let expect = term(signals.github_stars, 1.0, std::f64::consts::E)
            + term(signals.citations, 1.0, 8.0)
            + term(signals.influential_citations, 10.0, 8.0)
            + term(signals.altmetric, 1.0, 4.0);
        prop_assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn normalize_is_in_unit_range_and_order_preserving(weights in proptest::collection::vec(-1e3..1e3f64, 1..60)) {
        let out = normalize_weights(&weights).unwrap();
        for &v in &out {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let lo = weights.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            for (i, j) in (0..weights.len()).zip(1..weights.len()) {
                if weights[i] < weights[j] {
                    prop_assert!(out[i] < out[j]);
                } else if weights[i] > weights[j] {
                    prop_assert!(out[i] > out[j]);
                }
            }
        }
    }

    #[test]
    fn cosine_is_symmetric_and_scale_invariant(
        u in proptest::collection::vec(-10.0..10.0f64, 4),
        v in proptest::collection::vec(-10.0..10.0f64, 4),
        a in 0.1..10.0f64,
        b in 0.1..10.0f64,
    ) {
        let cuv = cosine_similarity(&u, &v).unwrap();
        let cvu = cosine_similarity(&v, &u).unwrap();
        prop_assert!((cuv - cvu).abs() < 1e-12);
        let au: Vec<f64> = u.iter().map(|x| a * x).collect();
        let bv: Vec<f64> = v.iter().map(|x| b * x).collect();
        let scaled = cosine_similarity(&au, &bv).unwrap();
        // The guard can trip on one side only for near-zero norms; skip those.
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nu > 1e-6 && nv > 1e-6 {
            prop_assert!((scaled - cuv).abs() < 1e-9, "{scaled} vs {cuv}");
        }
    }

    #[test]
    fn vanguard_branches_survive_weight_rescaling(
        weights in proptest::collection::vec(0.0..30.0f64, 3..40),
        scale in 0.01..100.0f64,
    ) {
        // Branch = (w_i >= neighborhood median); medians scale with the
        // weights, so positive rescaling cannot flip any branch.
        let n = weights.len();
        let topics: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let times: Vec<f64> = (0..n).map(|i| (i * 13 % 97) as f64).collect();
        let cfg = VanguardConfig { tau_time_days: 40.0, delta_base: 0.0 };
        let medians = compute_neighborhood_medians(&topics, &times, &weights, &cfg).unwrap();
        let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let scaled_medians = compute_neighborhood_medians(&topics, &times, &scaled, &cfg).unwrap();
        for i in 0..n {
            prop_assert_eq!(weights[i] >= medians[i], scaled[i] >= scaled_medians[i]);
        }
    }

    #[test]
    fn spearman_is_invariant_under_monotone_transforms(
        xs in proptest::collection::vec(-50.0..50.0f64, 3..30),
        ys in proptest::collection::vec(-50.0..50.0f64, 3..30),
        shift in -5.0..5.0f64,
    ) {
        let n = xs.len().min(ys.len());
        let xs = &xs[..n];
        let ys = &ys[..n];
        let base = spearman(xs, ys).unwrap();
        // Strictly increasing map: exp of a scaled shift keeps order and ties.
        let tx: Vec<f64> = xs.iter().map(|x| (x * 0.05 + shift).exp()).collect();
        let ty: Vec<f64> = ys.iter().map(|y| y * 3.0 + shift).collect();
        let transformed = spearman(&tx, &ty).unwrap();
        match (base, transformed) {
            (None, None) => {}
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}"),
            other => prop_assert!(false, "definedness changed: {:?}", other),
        }
    }
}

fn random_corpus_world(seed: u64) -> (Corpus, EmbeddingStore) {
    let mut rng = SeedRng::seed_from_u64(seed);
    let n = 12 + rng.index(20);
    let dim = 3;
    let mut records = Vec::new();
    let mut vectors = Vec::new();
    for i in 0..n {
        let id = format!("p{i:03}");
        let n_cites = rng.index(4.min(i + 1));
        let mut biblio = Vec::new();
        for _ in 0..n_cites {
            biblio.push(format!("p{:03}", rng.index(i.max(1))));
        }
        records.push(PaperRecord {
            schema_version: 1,
            id,
            title: String::new(),
            abstract_text: String::new(),
            timestamp_days: (i as f64) * rng.uniform_in(5.0, 50.0),
            bibliography: biblio,
            signals: ImpactSignals::default(),
            embedding_index: None,
        });
        vectors.push((0..dim).map(|_| rng.normal()).collect());
    }
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    (
        Corpus::from_records(records).unwrap(),
        EmbeddingStore::new(ids, EmbeddingMatrix::from_rows(vectors).unwrap()).unwrap(),
    )
}

#[test]
fn graph_edges_satisfy_all_three_filters_on_random_corpora() {
    let cfg = GraphConfig::default();
    let mock = MockVerifier {
        accept_threshold: 0.5,
    };
    for seed in 0..50 {
        let (corpus, store) = random_corpus_world(seed);
        let build = build_graph(&corpus, &store, &cfg, &mock).unwrap();
        assert_forward_in_time(&build.edges, &corpus);
        for e in &build.edges {
            let later = corpus.get(&e.to_id).unwrap();
            let earlier = corpus.get(&e.from_id).unwrap();
            assert!(
                later.bibliography.contains(&e.from_id),
                "edge {} -> {} not in bibliography",
                e.from_id,
                e.to_id
            );
            let sim = cosine_similarity(
                store.vector(&e.from_id).unwrap(),
                store.vector(&e.to_id).unwrap(),
            )
            .unwrap();
            assert!(sim > cfg.tau_sim, "similarity {sim} not above threshold");
            assert!(
                later.timestamp_days - earlier.timestamp_days > cfg.delta_days_min,
                "gap too small"
            );
        }
    }
}

#[test]
fn time_encoding_is_injective_on_a_fine_grid() {
    // Oracle: pairwise distance scan over 1000 normalized times in [0, 1]
    // with the default encoder dimensions.
    let cfg = TimeEncoderConfig {
        d_time: 64,
        t_min: 0.0,
        t_max: 1.0,
        base: fame_core::manifold::DEFAULT_TIME_BASE,
    };
    let n = 1000;
    let encodings: Vec<Vec<f64>> = (0..n)
        .map(|i| time_encode_normalized(i as f64 / (n - 1) as f64, &cfg))
        .collect();
    let mut min_dist = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = encodings[i]
                .iter()
                .zip(&encodings[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            min_dist = min_dist.min(d);
        }
    }
    assert!(min_dist > 1e-9, "closest pair at distance {min_dist}");
}
