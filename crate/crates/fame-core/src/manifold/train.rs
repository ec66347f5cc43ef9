//! Training-run assembly: per-paper context, mini-batch loop, checkpointing.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::adam_step;
use crate::corpus::{
    compute_impact_weight, normalize_weights, Corpus, CorpusSplit, Days, MetricParams,
};
use crate::embedding::{assign_topic, EmbeddingStore, TopicModel};
use crate::error::{CoreError, Result};
use crate::graph::InspirationEdge;
use crate::rng::SeedRng;

use super::loss::{batch_losses, BatchSelection};
use super::{
    compute_neighborhood_medians, ArchConfig, ManifoldModel, ModelCheckpoint, TimeEncoderConfig,
    TrainConfig, VanguardConfig, CHECKPOINT_SCHEMA_VERSION,
};

/// One train paper with everything the losses need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainPaper {
    pub id: String,
    /// Row in the embedding matrix.
    pub row: usize,
    pub t: Days,
    pub topic: usize,
    /// Raw composite impact weight.
    pub weight: f64,
    /// Min-max normalized weight over the whole train set.
    pub weight_norm: f64,
    /// Neighborhood median of raw weights.
    pub median: f64,
}

/// Immutable per-run training context.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainContext {
    pub papers: Vec<TrainPaper>,
    /// Edges as (from, to) indices into `papers`.
    pub edges: Vec<(usize, usize)>,
}

/// Per-epoch mean component values (zero for disabled components).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub total: f64,
    pub spine: f64,
    pub inspire: f64,
    pub vanguard: f64,
}

/// Result of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: ModelCheckpoint,
    pub trace: Vec<EpochTrace>,
}

/// Resolves train papers, topics, weights, normalized weights, neighborhood
/// medians, and edge endpoints. Fails if a train paper lacks an embedding or
/// an edge references a paper outside the train set.
pub fn build_train_context(
    corpus: &Corpus,
    train_ids: &[String],
    embeddings: &EmbeddingStore,
    topics: &TopicModel,
    edges: &[InspirationEdge],
    metric_params: &MetricParams,
    vanguard: &VanguardConfig,
) -> Result<TrainContext> {
    metric_params.validate()?;
    let mut papers = Vec::with_capacity(train_ids.len());
    let mut position = alloc::collections::BTreeMap::new();
    for id in train_ids {
        let rec = corpus
            .get(id)
            .ok_or_else(|| CoreError::data(format!("unknown paper id '{id}'")))?;
        let row = embeddings
            .row_of(id)
            .ok_or_else(|| CoreError::data(format!("paper '{id}' has no embedding")))?;
        let topic = assign_topic(embeddings.matrix.row(row), topics)?;
        let weight = compute_impact_weight(&rec.signals, metric_params);
        position.insert(id.clone(), papers.len());
        papers.push(TrainPaper {
            id: id.clone(),
            row,
            t: rec.timestamp_days,
            topic,
            weight,
            weight_norm: 0.0,
            median: 0.0,
        });
    }

    if !papers.is_empty() {
        let weights: Vec<f64> = papers.iter().map(|p| p.weight).collect();
        let topics_v: Vec<usize> = papers.iter().map(|p| p.topic).collect();
        let times: Vec<f64> = papers.iter().map(|p| p.t).collect();
        let norm = normalize_weights(&weights)?;
        let medians = compute_neighborhood_medians(&topics_v, &times, &weights, vanguard)?;
        for ((p, wn), m) in papers.iter_mut().zip(norm).zip(medians) {
            p.weight_norm = wn;
            p.median = m;
        }
    }

    let mut edge_indices = Vec::with_capacity(edges.len());
    for e in edges {
        let from = *position.get(&e.from_id).ok_or_else(|| {
            CoreError::data(format!("edge references unknown train paper '{}'", e.from_id))
        })?;
        let to = *position.get(&e.to_id).ok_or_else(|| {
            CoreError::data(format!("edge references unknown train paper '{}'", e.to_id))
        })?;
        edge_indices.push((from, to));
    }

    Ok(TrainContext {
        papers,
        edges: edge_indices,
    })
}

fn time_window(papers: &[TrainPaper]) -> (Days, Days) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in papers {
        lo = lo.min(p.t);
        hi = hi.max(p.t);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

/// Trains the manifold on the split's train side and returns a checkpoint
/// plus the per-epoch loss trace. Deterministic for a fixed seed.
pub fn train(
    corpus: &Corpus,
    split: &CorpusSplit,
    embeddings: &EmbeddingStore,
    topics: &TopicModel,
    edges: &[InspirationEdge],
    metric_params: &MetricParams,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let ctx = build_train_context(
        corpus,
        &split.train_ids,
        embeddings,
        topics,
        edges,
        metric_params,
        &cfg.vanguard,
    )?;

    let (t_min, t_max) = time_window(&ctx.papers);
    let time = TimeEncoderConfig {
        d_time: cfg.d_time,
        t_min,
        t_max,
        base: cfg.time_base,
    };
    let arch = ArchConfig {
        embed_dim: embeddings.matrix.dim(),
        d_topic: cfg.d_topic,
        d_z: cfg.d_z,
        hidden: cfg.hidden.clone(),
    };

    let mut rng = SeedRng::seed_from_u64(cfg.seed);
    let mut model = ManifoldModel::init(arch, time, topics.k, &mut rng)?;

    let mut trace = Vec::new();
    if !ctx.papers.is_empty() {
        let n = ctx.papers.len();
        let m = ctx.edges.len();
        let steps = if cfg.full_batch {
            1
        } else {
            n.div_ceil(cfg.batch_size)
        };
        let mut paper_order: Vec<usize> = (0..n).collect();
        let mut edge_order: Vec<usize> = (0..m).collect();

        for epoch in 0..cfg.epochs {
            if !cfg.full_batch {
                rng.shuffle(&mut paper_order);
                rng.shuffle(&mut edge_order);
            }
            let mut sums = [0.0f64; 4];
            for step in 0..steps {
                let paper_lo = step * n / steps;
                let paper_hi = (step + 1) * n / steps;
                let edge_lo = step * m / steps;
                let edge_hi = (step + 1) * m / steps;
                let sel = BatchSelection {
                    papers: &paper_order[paper_lo..paper_hi],
                    edges: &edge_order[edge_lo..edge_hi],
                };
                let losses =
                    batch_losses(&model, &embeddings.matrix, &ctx, &sel, cfg, true).map_err(
                        |e| match e {
                            CoreError::Diverged(msg) => CoreError::Diverged(format!(
                                "epoch {epoch}, step {step}: {msg}"
                            )),
                            other => other,
                        },
                    )?;
                let grads = losses.grads.as_ref().expect("gradients requested");
                adam_step(&mut model.params, grads, cfg.learning_rate, &Default::default());
                sums[0] += losses.total;
                sums[1] += losses.spine;
                sums[2] += losses.inspire;
                sums[3] += losses.vanguard;
            }
            let inv = 1.0 / steps as f64;
            trace.push(EpochTrace {
                epoch,
                total: sums[0] * inv,
                spine: sums[1] * inv,
                inspire: sums[2] * inv,
                vanguard: sums[3] * inv,
            });
        }
    }

    let checkpoint = ModelCheckpoint {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        activation: String::from("relu"),
        train_config: cfg.clone(),
        metric_params: *metric_params,
        cutoff_days: split.cutoff_days,
        arch: model.arch.clone(),
        time: model.time,
        topic_model: topics.clone(),
        params: model.params,
        rng_state: rng.state(),
    };
    Ok(TrainOutcome { checkpoint, trace })
}
