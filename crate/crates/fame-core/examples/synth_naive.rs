// Naive-baseline score on a tunable synthetic world.
use fame_core::eval::*;
use fame_core::graph::MockVerifier;
use fame_core::synth::{generate, SynthConfig};

fn main() {
    let a: Vec<String> = std::env::args().collect();
    let get = |i: usize, d: f64| a.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let sigma = get(1, 0.5);
    let drift = get(2, 2.0);
    let span = get(3, 1440.0);
    let base = get(4, 4.0);
    let scfg = SynthConfig { noise_scale: sigma, drift_rate: drift, span_days: span, base_scale: base, ..SynthConfig::default() };
    let out = generate(&scfg).unwrap();
    let cfg = PipelineConfig { k_topics: 3, ..PipelineConfig::default() };
    let verifier = MockVerifier { accept_threshold: out.truth.suggested_mock_threshold };
    let cutoff = span - 120.0;
    let report = eval_variants(&out.corpus, &out.embeddings, &[cutoff], &cfg, &[1, 2, 3], &verifier, &["naive"]).unwrap();
    for row in &report.rows {
        println!("naive sigma={sigma} drift={drift} span={span} seed={}: rho={:.3} top5={}", row.seed, row.spearman.unwrap_or(f64::NAN), row.top5);
    }
    let mean = report.mean_spearman("naive");
    println!("naive mean rho = {:?}", mean);
}
