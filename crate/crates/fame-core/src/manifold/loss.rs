//! The three geometric objectives, assembled on one tape per step.
//!
//! Per batch paper `i`: the spine term is `||z_i - mu_{c_i}(t_i)||^2`; the
//! vanguard term compares the residual's cosine against the topic momentum,
//! with a dynamic margin for papers at or above their neighborhood median
//! and a plain pushback below it. Per edge `(i, j)`: a hinge on the cosine
//! between the jump `z_j - z_i` and the inspired topic's momentum, plus
//! `||z_i - z_j||^2`.
//!
//! Mapper and spine evaluations are memoized per paper within a step, so in
//! full-batch mode the edge loss reuses the paper forwards. Components with
//! a zero weight are skipped entirely and reported as 0.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::autodiff::{Gradients, NodeId, Tape, Tensor};
use crate::embedding::EmbeddingMatrix;
use crate::error::{CoreError, Result};

use super::net::Mlp;
use super::train::TrainContext;
use super::{time_encode_normalized, ManifoldModel, Reduction, TrainConfig};

/// Indices (into the train context) making up one optimization step.
#[derive(Debug, Clone, Copy)]
pub struct BatchSelection<'a> {
    pub papers: &'a [usize],
    pub edges: &'a [usize],
}

/// Component values for one step; disabled (zero-weight) components read 0.
#[derive(Debug, Clone)]
pub struct StepLosses {
    pub spine: f64,
    pub inspire: f64,
    pub vanguard: f64,
    pub total: f64,
    pub grads: Option<Gradients>,
}

struct PulledMlp {
    net: Mlp,
    layers: Vec<(NodeId, NodeId)>,
}

impl PulledMlp {
    fn pull(net: Mlp, tape: &mut Tape<'_>) -> Result<Self> {
        let layers = net.pull_params(tape)?;
        Ok(PulledMlp { net, layers })
    }

    fn forward(&self, tape: &mut Tape<'_>, input: NodeId) -> Result<NodeId> {
        self.net.forward_with(tape, &self.layers, input)
    }
}

/// Per-step forward cache: each paper's latent point, spine point, and
/// lagged spine point are computed at most once.
struct Forwarder {
    mapper: PulledMlp,
    spine: PulledMlp,
    bases: BTreeMap<usize, NodeId>,
    z: BTreeMap<usize, NodeId>,
    mu: BTreeMap<usize, NodeId>,
    mu_prev: BTreeMap<usize, NodeId>,
}

impl Forwarder {
    fn new(model: &ManifoldModel, tape: &mut Tape<'_>) -> Result<Self> {
        Ok(Forwarder {
            mapper: PulledMlp::pull(ManifoldModel::mapper_net(&model.arch, &model.time), tape)?,
            spine: PulledMlp::pull(ManifoldModel::spine_net(&model.arch, &model.time), tape)?,
            bases: BTreeMap::new(),
            z: BTreeMap::new(),
            mu: BTreeMap::new(),
            mu_prev: BTreeMap::new(),
        })
    }

    fn base_node(
        &mut self,
        tape: &mut Tape<'_>,
        topic: usize,
    ) -> Result<NodeId> {
        if let Some(&id) = self.bases.get(&topic) {
            return Ok(id);
        }
        let id = tape.param(&super::topic_base_name(topic))?;
        self.bases.insert(topic, id);
        Ok(id)
    }

    fn z_node(
        &mut self,
        tape: &mut Tape<'_>,
        model: &ManifoldModel,
        matrix: &EmbeddingMatrix,
        ctx: &TrainContext,
        paper: usize,
    ) -> Result<NodeId> {
        if let Some(&id) = self.z.get(&paper) {
            return Ok(id);
        }
        let p = &ctx.papers[paper];
        let mut input = Vec::with_capacity(model.arch.embed_dim + model.time.d_time);
        input.extend_from_slice(matrix.row(p.row));
        input.extend(time_encode_normalized(model.time.normalize(p.t), &model.time));
        let x = tape.constant(Tensor::vector(input));
        let id = self.mapper.forward(tape, x)?;
        self.z.insert(paper, id);
        Ok(id)
    }

    fn spine_pair(
        &mut self,
        tape: &mut Tape<'_>,
        model: &ManifoldModel,
        ctx: &TrainContext,
        paper: usize,
        delta_t: f64,
    ) -> Result<(NodeId, NodeId)> {
        if let (Some(&mu), Some(&prev)) = (self.mu.get(&paper), self.mu_prev.get(&paper)) {
            return Ok((mu, prev));
        }
        let p = &ctx.papers[paper];
        let base = self.base_node(tape, p.topic)?;
        let t_prime = model.time.normalize(p.t);
        let mut pair = [NodeId::default(); 2];
        for (slot, tp) in pair.iter_mut().zip([t_prime, t_prime - delta_t]) {
            let enc = tape.constant(Tensor::vector(time_encode_normalized(tp, &model.time)));
            let input = tape.concat(base, enc)?;
            *slot = self.spine.forward(tape, input)?;
        }
        self.mu.insert(paper, pair[0]);
        self.mu_prev.insert(paper, pair[1]);
        Ok((pair[0], pair[1]))
    }
}

fn reduce(tape: &mut Tape<'_>, terms: &[NodeId], reduction: Reduction) -> Result<NodeId> {
    match reduction {
        Reduction::Mean => tape.mean(terms),
        Reduction::Sum => {
            let weighted: Vec<(f64, NodeId)> = terms.iter().map(|&t| (1.0, t)).collect();
            tape.weighted_sum(&weighted)
        }
    }
}

/// Computes the active loss components (and optionally gradients) for one
/// batch. Fails with a divergence diagnostic if any component goes
/// non-finite.
pub fn batch_losses(
    model: &ManifoldModel,
    matrix: &EmbeddingMatrix,
    ctx: &TrainContext,
    sel: &BatchSelection<'_>,
    cfg: &TrainConfig,
    compute_grads: bool,
) -> Result<StepLosses> {
    let mut tape = Tape::new(&model.params);
    let mut fwd = Forwarder::new(model, &mut tape)?;
    let w = &cfg.weights;
    let mut total_terms: Vec<(f64, NodeId)> = Vec::new();

    let spine_node = if w.alpha != 0.0 {
        let mut terms = Vec::with_capacity(sel.papers.len());
        for &i in sel.papers {
            let z = fwd.z_node(&mut tape, model, matrix, ctx, i)?;
            let (mu, _) = fwd.spine_pair(&mut tape, model, ctx, i, cfg.delta_t)?;
            let residual = tape.sub(z, mu)?;
            terms.push(tape.l2_norm_sq(residual)?);
        }
        let node = reduce(&mut tape, &terms, cfg.reduction)?;
        total_terms.push((w.alpha, node));
        Some(node)
    } else {
        None
    };

    let inspire_node = if w.beta != 0.0 {
        let mut terms = Vec::with_capacity(sel.edges.len());
        for &e in sel.edges {
            let (i, j) = ctx.edges[e];
            let zi = fwd.z_node(&mut tape, model, matrix, ctx, i)?;
            let zj = fwd.z_node(&mut tape, model, matrix, ctx, j)?;
            let (mu_j, mu_j_prev) = fwd.spine_pair(&mut tape, model, ctx, j, cfg.delta_t)?;
            let jump = tape.sub(zj, zi)?;
            let momentum = tape.sub(mu_j, mu_j_prev)?;
            let cos = tape.cosine_sim(jump, momentum)?;
            let hinge = tape.hinge(cos, cfg.delta_align)?;
            let gap = tape.sub(zi, zj)?;
            let dist = tape.l2_norm_sq(gap)?;
            terms.push(tape.weighted_sum(&[(1.0, hinge), (1.0, dist)])?);
        }
        let node = reduce(&mut tape, &terms, cfg.reduction)?;
        total_terms.push((w.beta, node));
        Some(node)
    } else {
        None
    };

    let vanguard_node = if w.gamma != 0.0 {
        let mut terms = Vec::with_capacity(sel.papers.len());
        for &i in sel.papers {
            let p = &ctx.papers[i];
            let z = fwd.z_node(&mut tape, model, matrix, ctx, i)?;
            let (mu, mu_prev) = fwd.spine_pair(&mut tape, model, ctx, i, cfg.delta_t)?;
            let residual = tape.sub(z, mu)?;
            let momentum = tape.sub(mu, mu_prev)?;
            let cos = tape.cosine_sim(residual, momentum)?;
            // Raw-weight comparison against the raw-median baseline.
            let term = if p.weight >= p.median {
                let margin =
                    cfg.vanguard.delta_base + (1.0 - cfg.vanguard.delta_base) * p.weight_norm;
                tape.hinge(cos, margin)?
            } else {
                tape.relu(cos)
            };
            terms.push(term);
        }
        let node = reduce(&mut tape, &terms, cfg.reduction)?;
        total_terms.push((w.gamma, node));
        Some(node)
    } else {
        None
    };

    let total_node = tape.weighted_sum(&total_terms)?;

    let component = |node: Option<NodeId>| node.map(|n| tape.scalar(n)).unwrap_or(0.0);
    let losses = StepLosses {
        spine: component(spine_node),
        inspire: component(inspire_node),
        vanguard: component(vanguard_node),
        total: tape.scalar(total_node),
        grads: None,
    };
    for (name, v) in [
        ("spine", losses.spine),
        ("inspire", losses.inspire),
        ("vanguard", losses.vanguard),
        ("total", losses.total),
    ] {
        if !v.is_finite() {
            return Err(CoreError::Diverged(alloc::format!(
                "loss component '{name}' is not finite ({v})"
            )));
        }
    }

    if compute_grads {
        let grads = tape.backward(total_node)?;
        Ok(StepLosses {
            grads: Some(grads),
            ..losses
        })
    } else {
        Ok(losses)
    }
}

/// Spine loss alone over the given papers.
pub fn loss_spine(
    model: &ManifoldModel,
    matrix: &EmbeddingMatrix,
    ctx: &TrainContext,
    papers: &[usize],
    cfg: &TrainConfig,
) -> Result<f64> {
    let mut solo = cfg.clone();
    solo.weights = super::LossWeights {
        alpha: 1.0,
        beta: 0.0,
        gamma: 0.0,
    };
    let sel = BatchSelection { papers, edges: &[] };
    Ok(batch_losses(model, matrix, ctx, &sel, &solo, false)?.spine)
}

/// Inspiration loss alone over the given edges.
pub fn loss_inspire(
    model: &ManifoldModel,
    matrix: &EmbeddingMatrix,
    ctx: &TrainContext,
    edges: &[usize],
    cfg: &TrainConfig,
) -> Result<f64> {
    let mut solo = cfg.clone();
    solo.weights = super::LossWeights {
        alpha: 0.0,
        beta: 1.0,
        gamma: 0.0,
    };
    let sel = BatchSelection { papers: &[], edges };
    Ok(batch_losses(model, matrix, ctx, &sel, &solo, false)?.inspire)
}

/// Vanguard loss alone over the given papers.
pub fn loss_vanguard(
    model: &ManifoldModel,
    matrix: &EmbeddingMatrix,
    ctx: &TrainContext,
    papers: &[usize],
    cfg: &TrainConfig,
) -> Result<f64> {
    let mut solo = cfg.clone();
    solo.weights = super::LossWeights {
        alpha: 0.0,
        beta: 0.0,
        gamma: 1.0,
    };
    let sel = BatchSelection { papers, edges: &[] };
    Ok(batch_losses(model, matrix, ctx, &sel, &solo, false)?.vanguard)
}
