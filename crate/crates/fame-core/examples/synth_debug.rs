// Diagnose the learned geometry on the synthetic world.
use fame_core::corpus::{compute_impact_weight, temporal_split, MetricParams};
use fame_core::embedding::{cosine_similarity, fit_kmeans, assign_topic};
use fame_core::eval::{score_paper, spearman};
use fame_core::graph::{build_graph, GraphConfig, MockVerifier};
use fame_core::manifold::{train, TrainConfig};
use fame_core::synth::{generate, SynthConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let alpha: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let gamma: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let out = generate(&SynthConfig::default()).unwrap();
    let corpus = &out.corpus;
    let embeddings = &out.embeddings;
    let cutoff = 600.0;
    let split = temporal_split(corpus, cutoff);
    let train_rows: Vec<usize> = split.train_ids.iter().map(|id| embeddings.row_of(id).unwrap()).collect();
    let topics = fit_kmeans(&embeddings.matrix, Some(&train_rows), 3, 1).unwrap();

    // How well do kmeans clusters match planted topics?
    let mut confusion = [[0usize; 3]; 3];
    for (i, id) in split.train_ids.iter().enumerate() {
        let pos = corpus.position(id).unwrap();
        confusion[out.truth.topic_of[pos]][topics.assignments[i]] += 1;
    }
    eprintln!("topic confusion (planted x cluster): {confusion:?}");

    let train_corpus = corpus.subset(&split.train_ids).unwrap();
    let verifier = MockVerifier { accept_threshold: out.truth.suggested_mock_threshold };
    let build = build_graph(&train_corpus, embeddings, &GraphConfig::default(), &verifier).unwrap();
    eprintln!("edges: {}", build.edges.len());

    let mut cfg = TrainConfig { epochs, learning_rate: lr, ..TrainConfig::default() };
    cfg.weights.alpha = alpha;
    cfg.weights.gamma = gamma;
    cfg.seed = 1;
    let outcome = train(corpus, &split, embeddings, &topics, &build.edges, &MetricParams::default(), &cfg).unwrap();
    let model = outcome.checkpoint.model();
    let tr = &outcome.trace;
    eprintln!("loss first {:?}", &tr[0]);
    eprintln!("loss last  {:?}", &tr[tr.len()-1]);

    // Learned momentum vs planted drift, in latent space we can't compare
    // directly; instead check: residual-score of TRAIN papers vs weight.
    let mut train_scores = Vec::new();
    let mut train_w = Vec::new();
    let mut resid_norm = 0.0;
    let mut mom_norm = 0.0;
    for id in &split.train_ids {
        let rec = corpus.get(id).unwrap();
        let x = embeddings.vector(id).unwrap();
        let s = score_paper(x, rec.timestamp_days, &model, &topics, cfg.delta_t).unwrap();
        train_scores.push(s);
        train_w.push(compute_impact_weight(&rec.signals, &MetricParams::default()));
        let topic = assign_topic(x, &topics).unwrap();
        let z = model.map_paper(x, rec.timestamp_days).unwrap();
        let mu = model.spine_at(topic, rec.timestamp_days).unwrap();
        let mom = model.spine_momentum(topic, rec.timestamp_days, cfg.delta_t).unwrap();
        resid_norm += z.iter().zip(&mu).map(|(a,b)| (a-b)*(a-b)).sum::<f64>().sqrt();
        mom_norm += mom.iter().map(|v| v*v).sum::<f64>().sqrt();
    }
    let nt = split.train_ids.len() as f64;
    eprintln!("mean |residual| = {:.4}, mean |momentum| = {:.6}", resid_norm/nt, mom_norm/nt);
    eprintln!("TRAIN rho = {:?}", spearman(&train_scores, &train_w).unwrap());

    // Correlation between train score and planted alignment:
    let mut align = Vec::new();
    for id in &split.train_ids {
        align.push(out.truth.alignment[corpus.position(id).unwrap()]);
    }
    eprintln!("TRAIN rho(score, planted alignment) = {:?}", spearman(&train_scores, &align).unwrap());

    // Test-window performance.
    let mut test_scores = Vec::new();
    let mut test_w = Vec::new();
    for id in &split.test_ids {
        let rec = corpus.get(id).unwrap();
        if rec.timestamp_days <= cutoff + 61.0 {
            let x = embeddings.vector(id).unwrap();
            test_scores.push(score_paper(x, rec.timestamp_days, &model, &topics, cfg.delta_t).unwrap());
            test_w.push(compute_impact_weight(&rec.signals, &MetricParams::default()));
        }
    }
    eprintln!("TEST rho = {:?} (n={})", spearman(&test_scores, &test_w).unwrap(), test_w.len());

    // Upper bound check: score with the TRUE generator geometry.
    let mut ideal_scores = Vec::new();
    for id in &split.test_ids {
        let rec = corpus.get(id).unwrap();
        if rec.timestamp_days <= cutoff + 61.0 {
            let pos = corpus.position(id).unwrap();
            let k = out.truth.topic_of[pos];
            let tp = rec.timestamp_days / 720.0;
            let x = embeddings.vector(id).unwrap();
            let delta: Vec<f64> = x.iter().zip(&out.truth.bases[k]).zip(&out.truth.drifts[k])
                .map(|((xv, b), d)| xv - b - d * tp).collect();
            ideal_scores.push(cosine_similarity(&delta, &out.truth.drifts[k]).unwrap());
        }
    }
    eprintln!("IDEAL rho = {:?}", spearman(&ideal_scores, &test_w).unwrap());
}
