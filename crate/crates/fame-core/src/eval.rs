//! Inference and evaluation: the alignment score for unseen papers, rank
//! metrics, the sliding-window temporal-OOD harness, the raw-embedding
//! baseline, the ablation table, the loss-weight sweep, a linear 2D
//! projection, and the plain-text score-context block.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{adam_step, Gradients, ParamStore, Tape, Tensor};
use crate::corpus::{compute_impact_weight, temporal_split, Corpus, Days, MetricParams};
use crate::embedding::{assign_topic, cosine_similarity, fit_kmeans, EmbeddingStore, TopicModel};
use crate::error::{CoreError, Result};
use crate::graph::{
    build_graph, full_citation_graph, random_inspiration_graph, GraphConfig, InspirationEdge,
    Verifier,
};
use crate::manifold::{train, ManifoldModel, Mlp, ModelCheckpoint, TrainConfig};
use crate::rng::SeedRng;

/// Days in the "two month" future testing window.
pub const DEFAULT_HORIZON_DAYS: f64 = 61.0;

/// Default cluster count for a real (per-subfield) corpus.
pub const DEFAULT_K_TOPICS: usize = 10;

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

/// Predicted impact of an unseen paper: the guarded cosine between its
/// positional residual and its topic's instantaneous momentum.
pub fn score_paper(
    x: &[f64],
    t: Days,
    model: &ManifoldModel,
    topics: &TopicModel,
    delta_t: f64,
) -> Result<f64> {
    let topic = assign_topic(x, topics)?;
    let z = model.map_paper(x, t)?;
    let mu = model.spine_at(topic, t)?;
    let momentum = model.spine_momentum(topic, t, delta_t)?;
    let residual: Vec<f64> = z.iter().zip(&mu).map(|(a, b)| a - b).collect();
    cosine_similarity(&residual, &momentum)
}

/// Scores through a checkpoint (topic model and finite-difference step come
/// from the stored configs).
pub fn score_with_checkpoint(x: &[f64], t: Days, ckpt: &ModelCheckpoint) -> Result<f64> {
    let model = ckpt.model();
    score_paper(x, t, &model, &ckpt.topic_model, ckpt.train_config.delta_t)
}

// ---------------------------------------------------------------------------
// Rank metrics
// ---------------------------------------------------------------------------

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the average 1-based rank.
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    let denom = crate::fmath::sqrt(da) * crate::fmath::sqrt(db);
    if denom == 0.0 {
        None
    } else {
        Some(num / denom)
    }
}

/// Spearman rank correlation with average-rank tie handling. Undefined
/// inputs (fewer than 2 items, or either side constant) come back as `None`,
/// never as a silent 0.
pub fn spearman(pred: &[f64], truth: &[f64]) -> Result<Option<f64>> {
    if pred.len() != truth.len() {
        return Err(CoreError::argument(format!(
            "spearman: length mismatch {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.len() < 2 {
        return Ok(None);
    }
    Ok(pearson(&average_ranks(pred), &average_ranks(truth)))
}

/// Overlap between the top-k by prediction and the top-k by truth, divided
/// by the effective k (`min(k, n)`). Ties at the boundary break by
/// ascending id so the metric is deterministic.
pub fn top_k_accuracy(pred: &[f64], truth: &[f64], ids: &[String], k: usize) -> Result<f64> {
    let n = pred.len();
    if n == 0 || truth.len() != n || ids.len() != n {
        return Err(CoreError::argument(
            "top_k_accuracy: inputs must be nonempty and parallel",
        ));
    }
    if k == 0 {
        return Err(CoreError::argument("top_k_accuracy: k must be >= 1"));
    }
    let eff_k = k.min(n);
    let top = |scores: &[f64]| -> BTreeSet<usize> {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| ids[a].cmp(&ids[b])));
        order.into_iter().take(eff_k).collect()
    };
    let by_pred = top(pred);
    let by_truth = top(truth);
    Ok(by_pred.intersection(&by_truth).count() as f64 / eff_k as f64)
}

// ---------------------------------------------------------------------------
// Sliding-window evaluation
// ---------------------------------------------------------------------------

/// Which inspiration graph the pipeline trains with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum GraphVariant {
    #[default]
    Verified,
    FullCitation,
    Random,
}

/// Everything one evaluation run needs besides data and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub k_topics: usize,
    pub graph: GraphConfig,
    pub train: TrainConfig,
    pub metric_params: MetricParams,
    pub horizon_days: f64,
    pub naive: NaiveConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k_topics: DEFAULT_K_TOPICS,
            graph: GraphConfig::default(),
            train: TrainConfig::default(),
            metric_params: MetricParams::default(),
            horizon_days: DEFAULT_HORIZON_DAYS,
            naive: NaiveConfig::default(),
        }
    }
}

/// One scored test paper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub id: String,
    pub predicted: f64,
    pub actual: f64,
}

/// Metrics for one (window, seed, variant) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub cutoff: Days,
    pub n_test: usize,
    pub seed: u64,
    pub variant: String,
    pub spearman: Option<f64>,
    pub top5: f64,
    pub pairs: Vec<ScorePair>,
}

/// Mean/std aggregate over the seeds of one window (missing correlations
/// excluded, with the surviving count reported).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub cutoff: Days,
    pub variant: String,
    pub n_seeds: usize,
    pub n_defined: usize,
    pub mean_spearman: Option<f64>,
    pub std_spearman: Option<f64>,
    pub mean_top5: f64,
    pub std_top5: f64,
}

/// Full evaluation output.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<WindowRow>,
    pub summaries: Vec<WindowSummary>,
    pub seeds: Vec<u64>,
    pub warnings: Vec<String>,
}

impl EvalReport {
    /// Mean Spearman across all defined rows of one variant.
    pub fn mean_spearman(&self, variant: &str) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.variant == variant)
            .filter_map(|r| r.spearman)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, crate::fmath::sqrt(var))
}

fn summarize(rows: &[WindowRow]) -> Vec<WindowSummary> {
    let mut keys: Vec<(String, u64)> = Vec::new(); // (variant, cutoff bits)
    for r in rows {
        let key = (r.variant.clone(), r.cutoff.to_bits());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(variant, cutoff_bits)| {
            let cutoff = f64::from_bits(cutoff_bits);
            let group: Vec<&WindowRow> = rows
                .iter()
                .filter(|r| r.variant == variant && r.cutoff.to_bits() == cutoff_bits)
                .collect();
            let defined: Vec<f64> = group.iter().filter_map(|r| r.spearman).collect();
            let top5: Vec<f64> = group.iter().map(|r| r.top5).collect();
            let (mean_top5, std_top5) = mean_std(&top5);
            let (mean_spearman, std_spearman) = if defined.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&defined);
                (Some(m), Some(s))
            };
            WindowSummary {
                cutoff,
                variant,
                n_seeds: group.len(),
                n_defined: defined.len(),
                mean_spearman,
                std_spearman,
                mean_top5,
                std_top5,
            }
        })
        .collect()
}

/// Scoring backends a window run can produce.
enum WindowScorer {
    Manifold {
        model: ManifoldModel,
        topics: TopicModel,
        delta_t: f64,
    },
    Naive(NaiveModel),
}

impl WindowScorer {
    fn score(&self, x: &[f64], t: Days) -> Result<f64> {
        match self {
            WindowScorer::Manifold {
                model,
                topics,
                delta_t,
            } => score_paper(x, t, model, topics, *delta_t),
            WindowScorer::Naive(naive) => naive.score(x),
        }
    }
}

/// Train-side artifacts of one window run, exposed for leakage checks.
pub struct WindowArtifacts {
    pub topics: Option<TopicModel>,
    pub edges: Vec<InspirationEdge>,
    pub checkpoint: Option<ModelCheckpoint>,
    pub naive_params: Option<ParamStore>,
}

/// Runs one (cutoff, seed, variant) cell: refit clustering on train, rebuild
/// the graph on train, train the model, score the papers inside the horizon.
/// Returns `None` (with a warning pushed) when the window is empty.
#[allow(clippy::too_many_arguments)]
fn run_window(
    corpus: &Corpus,
    embeddings: &EmbeddingStore,
    cutoff: Days,
    cfg: &PipelineConfig,
    seed: u64,
    variant: &str,
    verifier: &dyn Verifier,
    warnings: &mut Vec<String>,
    artifacts_out: Option<&mut WindowArtifacts>,
) -> Result<Option<WindowRow>> {
    let split = temporal_split(corpus, cutoff);
    let test_window: Vec<&str> = split
        .test_ids
        .iter()
        .map(|s| s.as_str())
        .filter(|id| {
            let t = corpus.get(id).expect("split id in corpus").timestamp_days;
            t > cutoff && t <= cutoff + cfg.horizon_days
        })
        .collect();
    if split.train_ids.is_empty() || test_window.is_empty() {
        warnings.push(format!(
            "window at cutoff {cutoff} skipped: {} train papers, {} test papers in horizon",
            split.train_ids.len(),
            test_window.len()
        ));
        return Ok(None);
    }

    let train_corpus = corpus.subset(&split.train_ids)?;
    let train_weights: Vec<f64> = train_corpus
        .records()
        .iter()
        .map(|r| compute_impact_weight(&r.signals, &cfg.metric_params))
        .collect();

    let mut artifacts = WindowArtifacts {
        topics: None,
        edges: Vec::new(),
        checkpoint: None,
        naive_params: None,
    };

    let scorer = if variant == "naive" {
        let rows: Vec<usize> = split
            .train_ids
            .iter()
            .map(|id| {
                embeddings
                    .row_of(id)
                    .ok_or_else(|| CoreError::data(format!("paper '{id}' has no embedding")))
            })
            .collect::<Result<_>>()?;
        let mut naive_cfg = cfg.naive.clone();
        naive_cfg.seed = seed;
        let naive = train_naive(&embeddings.matrix, &rows, &train_weights, &naive_cfg)?;
        artifacts.naive_params = Some(naive.params.clone());
        WindowScorer::Naive(naive)
    } else {
        let train_rows: Vec<usize> = split
            .train_ids
            .iter()
            .map(|id| {
                embeddings
                    .row_of(id)
                    .ok_or_else(|| CoreError::data(format!("paper '{id}' has no embedding")))
            })
            .collect::<Result<_>>()?;
        let topics = fit_kmeans(&embeddings.matrix, Some(&train_rows), cfg.k_topics, seed)?;

        let graph_variant = match variant {
            "full_citation_graph" => GraphVariant::FullCitation,
            "random_inspiration_graph" => GraphVariant::Random,
            _ => GraphVariant::Verified,
        };
        let edges = match graph_variant {
            GraphVariant::Verified => {
                let build = build_graph(&train_corpus, embeddings, &cfg.graph, verifier)?;
                warnings.extend(build.warnings);
                build.edges
            }
            GraphVariant::FullCitation => full_citation_graph(&train_corpus),
            GraphVariant::Random => random_inspiration_graph(&train_corpus, seed),
        };

        let mut train_cfg = cfg.train.clone();
        train_cfg.seed = seed;
        match variant {
            "no_inspire" => train_cfg.weights.beta = 0.0,
            "no_vanguard" => train_cfg.weights.gamma = 0.0,
            "no_spine" => train_cfg.weights.alpha = 0.0,
            _ => {}
        }
        let outcome = train(
            corpus,
            &split,
            embeddings,
            &topics,
            &edges,
            &cfg.metric_params,
            &train_cfg,
        )?;
        let model = outcome.checkpoint.model();
        artifacts.topics = Some(topics.clone());
        artifacts.edges = edges;
        artifacts.checkpoint = Some(outcome.checkpoint);
        WindowScorer::Manifold {
            model,
            topics,
            delta_t: train_cfg.delta_t,
        }
    };

    let mut pairs = Vec::with_capacity(test_window.len());
    for id in &test_window {
        let rec = corpus.get(id).expect("test id in corpus");
        let x = embeddings
            .vector(id)
            .ok_or_else(|| CoreError::data(format!("paper '{id}' has no embedding")))?;
        let predicted = scorer.score(x, rec.timestamp_days)?;
        let actual = compute_impact_weight(&rec.signals, &cfg.metric_params);
        pairs.push(ScorePair {
            id: (*id).into(),
            predicted,
            actual,
        });
    }

    let pred: Vec<f64> = pairs.iter().map(|p| p.predicted).collect();
    let actual: Vec<f64> = pairs.iter().map(|p| p.actual).collect();
    let ids: Vec<String> = pairs.iter().map(|p| p.id.clone()).collect();
    let rho = spearman(&pred, &actual)?;
    let top5 = top_k_accuracy(&pred, &actual, &ids, 5)?;

    if let Some(slot) = artifacts_out {
        *slot = artifacts;
    }
    Ok(Some(WindowRow {
        cutoff,
        n_test: pairs.len(),
        seed,
        variant: variant.into(),
        spearman: rho,
        top5,
        pairs,
    }))
}

/// Temporal-OOD evaluation over a list of cutoffs and seeds for one variant.
pub fn sliding_window_eval(
    corpus: &Corpus,
    embeddings: &EmbeddingStore,
    cutoffs: &[Days],
    cfg: &PipelineConfig,
    seeds: &[u64],
    verifier: &dyn Verifier,
) -> Result<EvalReport> {
    eval_variants(corpus, embeddings, cutoffs, cfg, seeds, verifier, &["fame"])
}

/// Runs the named variants over every (cutoff, seed) cell.
pub fn eval_variants(
    corpus: &Corpus,
    embeddings: &EmbeddingStore,
    cutoffs: &[Days],
    cfg: &PipelineConfig,
    seeds: &[u64],
    verifier: &dyn Verifier,
    variants: &[&str],
) -> Result<EvalReport> {
    let mut report = EvalReport {
        seeds: seeds.to_vec(),
        ..EvalReport::default()
    };
    for variant in variants {
        for &cutoff in cutoffs {
            for &seed in seeds {
                if let Some(row) = run_window(
                    corpus,
                    embeddings,
                    cutoff,
                    cfg,
                    seed,
                    variant,
                    verifier,
                    &mut report.warnings,
                    None,
                )? {
                    report.rows.push(row);
                }
            }
        }
    }
    report.summaries = summarize(&report.rows);
    Ok(report)
}

/// One isolated window run, returning the train-side artifacts for leakage
/// and determinism checks.
pub fn run_window_with_artifacts(
    corpus: &Corpus,
    embeddings: &EmbeddingStore,
    cutoff: Days,
    cfg: &PipelineConfig,
    seed: u64,
    verifier: &dyn Verifier,
) -> Result<(Option<WindowRow>, WindowArtifacts)> {
    let mut artifacts = WindowArtifacts {
        topics: None,
        edges: Vec::new(),
        checkpoint: None,
        naive_params: None,
    };
    let mut warnings = Vec::new();
    let row = run_window(
        corpus,
        embeddings,
        cutoff,
        cfg,
        seed,
        "fame",
        verifier,
        &mut warnings,
        Some(&mut artifacts),
    )?;
    Ok((row, artifacts))
}

/// All seven ablation variants, Appendix-table shaped: full model, the three
/// loss removals, the two graph substitutions, and the raw-embedding
/// baseline.
pub const ABLATION_VARIANTS: [&str; 7] = [
    "fame",
    "no_inspire",
    "no_vanguard",
    "no_spine",
    "full_citation_graph",
    "random_inspiration_graph",
    "naive",
];

pub fn ablation_suite(
    corpus: &Corpus,
    embeddings: &EmbeddingStore,
    cutoffs: &[Days],
    cfg: &PipelineConfig,
    seeds: &[u64],
    verifier: &dyn Verifier,
) -> Result<EvalReport> {
    eval_variants(
        corpus,
        embeddings,
        cutoffs,
        cfg,
        seeds,
        verifier,
        &ABLATION_VARIANTS,
    )
}

// ---------------------------------------------------------------------------
// Loss-weight sweep
// ---------------------------------------------------------------------------

/// One sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub mean_spearman: Option<f64>,
    pub n_defined: usize,
}

/// All nonnegative weight triples summing to 1 on a grid of the given step
/// (step must divide 1 into a whole number of increments).
pub fn simplex_grid(step: f64) -> Result<Vec<(f64, f64, f64)>> {
    if !(step > 0.0) || step > 1.0 {
        return Err(CoreError::argument("simplex_grid: step must be in (0, 1]"));
    }
    let parts = (1.0 / step + 0.5) as usize;
    if parts == 0 || ((parts as f64) * step - 1.0).abs() > 1e-9 {
        return Err(CoreError::argument(
            "simplex_grid: step must divide 1 evenly",
        ));
    }
    let mut grid = Vec::new();
    for i in 0..=parts {
        for j in 0..=(parts - i) {
            let k = parts - i - j;
            grid.push((i as f64 * step, j as f64 * step, k as f64 * step));
        }
    }
    Ok(grid)
}

/// Evaluates mean Spearman on a simplex grid over the loss weights.
pub fn loss_weight_sweep(
    corpus: &Corpus,
    embeddings: &EmbeddingStore,
    cutoffs: &[Days],
    cfg: &PipelineConfig,
    seeds: &[u64],
    step: f64,
    verifier: &dyn Verifier,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (alpha, beta, gamma) in simplex_grid(step)? {
        let mut point_cfg = cfg.clone();
        point_cfg.train.weights.alpha = alpha;
        point_cfg.train.weights.beta = beta;
        point_cfg.train.weights.gamma = gamma;
        let report =
            sliding_window_eval(corpus, embeddings, cutoffs, &point_cfg, seeds, verifier)?;
        let defined: Vec<f64> = report.rows.iter().filter_map(|r| r.spearman).collect();
        rows.push(SweepRow {
            alpha,
            beta,
            gamma,
            mean_spearman: if defined.is_empty() {
                None
            } else {
                Some(defined.iter().sum::<f64>() / defined.len() as f64)
            },
            n_defined: defined.len(),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Naive raw-embedding baseline
// ---------------------------------------------------------------------------

/// Baseline regressor settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for NaiveConfig {
    fn default() -> Self {
        NaiveConfig {
            hidden: vec![256, 256],
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 256,
            seed: 0,
        }
    }
}

/// MLP regressor straight from text embeddings to the impact weight.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveModel {
    dims: Vec<usize>,
    pub params: ParamStore,
}

impl NaiveModel {
    fn net(&self) -> Mlp {
        Mlp::new("naive", self.dims.clone())
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.net().forward_plain(&self.params, x)?[0])
    }
}

/// Trains the baseline with squared error on the train rows.
pub fn train_naive(
    matrix: &crate::embedding::EmbeddingMatrix,
    rows: &[usize],
    targets: &[f64],
    cfg: &NaiveConfig,
) -> Result<NaiveModel> {
    if rows.len() != targets.len() {
        return Err(CoreError::argument(
            "train_naive: rows and targets must be parallel",
        ));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(CoreError::argument("train_naive: invalid config"));
    }
    let mut dims = vec![matrix.dim()];
    dims.extend_from_slice(&cfg.hidden);
    dims.push(1);
    let net = Mlp::new("naive", dims.clone());
    let mut rng = SeedRng::seed_from_u64(cfg.seed);
    let mut params = ParamStore::new();
    net.register(&mut params, &mut rng)?;

    let n = rows.len();
    if n > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        let steps = n.div_ceil(cfg.batch_size);
        for _epoch in 0..cfg.epochs {
            rng.shuffle(&mut order);
            for step in 0..steps {
                let lo = step * n / steps;
                let hi = (step + 1) * n / steps;
                let batch = &order[lo..hi];
                if batch.is_empty() {
                    continue;
                }
                let (_, grads) = naive_batch_loss(&net, &params, matrix, rows, targets, batch)?;
                adam_step(&mut params, &grads, cfg.learning_rate, &Default::default());
            }
        }
    }
    Ok(NaiveModel { dims, params })
}

fn naive_batch_loss(
    net: &Mlp,
    params: &ParamStore,
    matrix: &crate::embedding::EmbeddingMatrix,
    rows: &[usize],
    targets: &[f64],
    batch: &[usize],
) -> Result<(f64, Gradients)> {
    let mut tape = Tape::new(params);
    let layers = net.pull_params(&mut tape)?;
    let mut terms = Vec::with_capacity(batch.len());
    for &i in batch {
        let x = tape.constant(Tensor::vector(matrix.row(rows[i]).to_vec()));
        let y = net.forward_with(&mut tape, &layers, x)?;
        let target = tape.constant(Tensor::vector(vec![targets[i]]));
        let diff = tape.sub(y, target)?;
        terms.push(tape.l2_norm_sq(diff)?);
    }
    let loss = tape.mean(&terms)?;
    let value = tape.scalar(loss);
    if !value.is_finite() {
        return Err(CoreError::Diverged(format!(
            "naive baseline loss is not finite ({value})"
        )));
    }
    let grads = tape.backward(loss)?;
    Ok((value, grads))
}

// ---------------------------------------------------------------------------
// Linear 2D projection (power iteration)
// ---------------------------------------------------------------------------

/// 2D coordinates plus the covariance eigenvalues they explain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub coords: Vec<[f64; 2]>,
    pub explained: [f64; 2],
}

fn mat_vec_cov(centered: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    // C v = X^T (X v) / n without materializing C.
    let n = centered.len();
    let d = v.len();
    let mut out = vec![0.0; d];
    for row in centered {
        let mut dot = 0.0;
        for (a, b) in row.iter().zip(v) {
            dot += a * b;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += dot * a;
        }
    }
    for o in &mut out {
        *o /= n as f64;
    }
    out
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = crate::fmath::sqrt(v.iter().map(|x| x * x).sum());
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// Centers the data and projects it onto the top two principal directions
/// found by power iteration with deflation. Deterministic given the seed.
pub fn project_2d(vectors: &[Vec<f64>], seed: u64) -> Result<Projection> {
    if vectors.is_empty() {
        return Err(CoreError::argument("project_2d: no vectors"));
    }
    let d = vectors[0].len();
    if d < 2 {
        return Err(CoreError::argument("project_2d: dimension must be >= 2"));
    }
    if vectors.iter().any(|v| v.len() != d) {
        return Err(CoreError::argument("project_2d: ragged input"));
    }
    let n = vectors.len();
    let mut mean = vec![0.0; d];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let mut rng = SeedRng::seed_from_u64(seed);
    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(2);
    let mut explained = [0.0; 2];
    for slot in 0..2 {
        let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        normalize(&mut v);
        let mut eigenvalue = 0.0;
        for _ in 0..500 {
            let mut next = mat_vec_cov(&centered, &v);
            let lambda = normalize(&mut next);
            let delta: f64 = next
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            v = next;
            eigenvalue = lambda;
            if delta < 1e-13 {
                break;
            }
        }
        explained[slot] = eigenvalue;
        // Deflate: remove this direction from every row.
        for row in &mut centered {
            let dot: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (r, dv) in row.iter_mut().zip(&v) {
                *r -= dot * dv;
            }
        }
        directions.push(v);
    }

    let coords = vectors
        .iter()
        .map(|x| {
            let mut c = [0.0; 2];
            for (slot, dir) in directions.iter().enumerate() {
                c[slot] = x
                    .iter()
                    .zip(&mean)
                    .zip(dir)
                    .map(|((xv, m), dv)| (xv - m) * dv)
                    .sum();
            }
            c
        })
        .collect();
    Ok(Projection { coords, explained })
}

// ---------------------------------------------------------------------------
// Score-context block
// ---------------------------------------------------------------------------

/// Formats per-paper scores as the plain-text context block: batch z-scores
/// (population std) in the input's index order. Degenerate batches (a single
/// score, or zero variance) fall back to raw scores with a note.
pub fn format_score_context(scores: &[f64]) -> String {
    let n = scores.len();
    let mut out = String::from(
        "manifold scores for this eval batch (same index order as the ideas list below):\n",
    );
    let (values, note): (Vec<f64>, &str) = if n >= 2 {
        let mean = scores.iter().sum::<f64>() / n as f64;
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n as f64;
        let std = crate::fmath::sqrt(var);
        if std > 0.0 {
            (
                scores.iter().map(|s| (s - mean) / std).collect(),
                "where score is the trained manifold prediction and z-scores are taken over \
                 this batch (population std). Use as auxiliary signal, judge each idea on its \
                 own merits:\n",
            )
        } else {
            (
                scores.to_vec(),
                "where score is the trained manifold prediction, shown raw: z-scores are \
                 undefined for a zero-variance batch. Use as auxiliary signal, judge each idea \
                 on its own merits:\n",
            )
        }
    } else {
        (
            scores.to_vec(),
            "where score is the trained manifold prediction, shown raw: z-scores are undefined \
             for a single-item batch. Use as auxiliary signal, judge each idea on its own \
             merits:\n",
        )
    };
    out.push_str(note);
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("- index {i}: {v:.4}\n"));
    }
    out
}
