// Lever scan: generator + training knobs vs held-out-window rho.
use fame_core::eval::*;
use fame_core::graph::MockVerifier;
use fame_core::manifold::TrainConfig;
use fame_core::synth::{generate, SynthConfig};
use std::time::Instant;

fn main() {
    let a: Vec<String> = std::env::args().collect();
    let get = |i: usize, d: f64| a.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let epochs = get(1, 100.0) as usize;
    let lr = get(2, 1e-3);
    let sigma = get(3, 0.3);
    let drift = get(4, 2.0);
    let span = get(5, 720.0);
    let alpha = get(6, 1.0);
    let seed = get(7, 1.0) as u64;
    let base = get(8, 4.0);
    let scfg = SynthConfig { noise_scale: sigma, drift_rate: drift, span_days: span, base_scale: base, ..SynthConfig::default() };
    let out = generate(&scfg).unwrap();
    let mut cfg = PipelineConfig {
        k_topics: 3,
        train: TrainConfig { epochs, learning_rate: lr, ..TrainConfig::default() },
        ..PipelineConfig::default()
    };
    cfg.train.weights.alpha = alpha;
    let verifier = MockVerifier { accept_threshold: out.truth.suggested_mock_threshold };
    let cutoff = span - 120.0;
    let t0 = Instant::now();
    let report = sliding_window_eval(&out.corpus, &out.embeddings, &[cutoff], &cfg, &[seed], &verifier).unwrap();
    let row = &report.rows[0];
    println!(
        "epochs={epochs} lr={lr} sigma={sigma} drift={drift} span={span} alpha={alpha} seed={seed}: n={} rho={:.3} top5={} [{:.0}s]",
        row.n_test, row.spearman.unwrap_or(f64::NAN), row.top5, t0.elapsed().as_secs_f64()
    );
}
