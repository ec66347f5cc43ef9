// Scratch experiment: can the pipeline recover the planted signal?
use fame_core::eval::*;
use fame_core::graph::MockVerifier;
use fame_core::manifold::TrainConfig;
use fame_core::synth::{generate, SynthConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-4);
    let full_batch: bool = args.get(3).map(|s| s == "full").unwrap_or(false);
    let variant: String = args.get(4).cloned().unwrap_or_else(|| "fame".into());
    let seed: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1);
    let out = generate(&SynthConfig::default()).unwrap();
    let cfg = PipelineConfig {
        k_topics: 3,
        train: TrainConfig {
            epochs,
            learning_rate: lr,
            full_batch,
            ..TrainConfig::default()
        },
        ..PipelineConfig::default()
    };
    let verifier = MockVerifier { accept_threshold: out.truth.suggested_mock_threshold };
    let cutoffs = [600.0];
    let t0 = Instant::now();
    let report = eval_variants(&out.corpus, &out.embeddings, &cutoffs, &cfg, &[seed], &verifier, &[&variant]).unwrap();
    let row = &report.rows[0];
    println!(
        "variant={variant} epochs={epochs} lr={lr} full={full_batch} seed={seed}: n_test={} rho={:?} top5={} elapsed={:.1}s",
        row.n_test, row.spearman, row.top5, t0.elapsed().as_secs_f64()
    );
}
