//! Minimal dense-tensor compute with reverse-mode differentiation.
//!
//! A [`Tape`] records exactly the forward primitives the manifold losses
//! need (matrix-vector product, elementwise add/sub, relu, concat, squared
//! L2 norm, guarded cosine, hinge, scalar weighted sum). [`Tape::backward`]
//! walks the record in reverse and accumulates gradients for every
//! parameter leaf. One tape is built per training step and freed after the
//! backward pass.
//!
//! Subgradients at relu/hinge kinks are 0, and the guarded cosine returns
//! value 0 with zero gradient when either operand norm falls below
//! [`crate::embedding::COSINE_NORM_EPS`]; both choices keep gradients
//! deterministic.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::embedding::COSINE_NORM_EPS;
use crate::error::{CoreError, Result};
use crate::fmath;

/// Dense row-major tensor (rank 0, 1 or 2 in practice).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn scalar(x: f64) -> Self {
        Tensor {
            shape: vec![],
            values: vec![x],
        }
    }

    pub fn vector(values: Vec<f64>) -> Self {
        Tensor {
            shape: vec![values.len()],
            values,
        }
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(CoreError::argument(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        Ok(Tensor {
            shape: vec![rows, cols],
            values,
        })
    }

    pub fn zeros_like(other: &Tensor) -> Self {
        Tensor {
            shape: other.shape.clone(),
            values: vec![0.0; other.values.len()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.shape.is_empty()
    }

    pub fn as_scalar(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.values[0]
    }
}

/// Named parameter tensors plus per-parameter Adam state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    index: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub value: Tensor,
    first_moment: Tensor,
    second_moment: Tensor,
    step: u64,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            entries: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(CoreError::argument(format!("duplicate parameter '{name}'")));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push(ParamEntry {
            name,
            first_moment: Tensor::zeros_like(&value),
            second_moment: Tensor::zeros_like(&value),
            step: 0,
            value,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.position(name).map(|i| &self.entries[i].value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        let i = self.position(name)?;
        Some(&mut self.entries[i].value)
    }

    pub fn step_of(&self, name: &str) -> Option<u64> {
        self.position(name).map(|i| self.entries[i].step)
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }
}

/// Gradients aligned with a store's entry order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros(store: &ParamStore) -> Self {
        Gradients {
            grads: store
                .entries
                .iter()
                .map(|e| Tensor::zeros_like(&e.value))
                .collect(),
        }
    }

    pub fn by_index(&self, i: usize) -> &Tensor {
        &self.grads[i]
    }

    pub fn of<'a>(&'a self, store: &ParamStore, name: &str) -> Option<&'a Tensor> {
        store.position(name).map(|i| &self.grads[i])
    }
}

/// Handle to a recorded tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Const,
    Param(usize),
    MatVec { w: NodeId, x: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Relu { x: NodeId },
    Concat { a: NodeId, b: NodeId },
    L2NormSq { x: NodeId },
    CosineSim { a: NodeId, b: NodeId },
    Hinge { x: NodeId, margin: f64 },
    WeightedSum { terms: Vec<(f64, NodeId)> },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Forward recorder over a parameter store.
pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Tape {
            store,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        debug_assert!(value.values.iter().all(|v| v.is_finite()));
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.as_scalar()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a constant (no gradient flows into it).
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Const)
    }

    /// Records a parameter leaf, copying its current value.
    pub fn param(&mut self, name: &str) -> Result<NodeId> {
        let idx = self
            .store
            .position(name)
            .ok_or_else(|| CoreError::argument(format!("unknown parameter '{name}'")))?;
        Ok(self.push(self.store.entries[idx].value.clone(), Op::Param(idx)))
    }

    /// Matrix-vector product: `[m, n] · [n] -> [m]`.
    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let wt = &self.nodes[w.0].value;
        let xt = &self.nodes[x.0].value;
        if wt.shape.len() != 2 || xt.shape.len() != 1 || wt.shape[1] != xt.shape[0] {
            return Err(CoreError::argument(format!(
                "matvec: incompatible shapes {:?} x {:?}",
                wt.shape, xt.shape
            )));
        }
        let n = wt.shape[1];
        let mut out = Vec::with_capacity(wt.shape[0]);
        for row in wt.values.chunks_exact(n) {
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(xt.values.iter()) {
                acc += a * b;
            }
            out.push(acc);
        }
        Ok(self.push(Tensor::vector(out), Op::MatVec { w, x }))
    }

    fn elementwise(&mut self, a: NodeId, b: NodeId, sub: bool) -> Result<NodeId> {
        let at = &self.nodes[a.0].value;
        let bt = &self.nodes[b.0].value;
        if at.shape != bt.shape {
            return Err(CoreError::argument(format!(
                "elementwise: shape mismatch {:?} vs {:?}",
                at.shape, bt.shape
            )));
        }
        let values = at
            .values
            .iter()
            .zip(bt.values.iter())
            .map(|(&x, &y)| if sub { x - y } else { x + y })
            .collect();
        let t = Tensor {
            shape: at.shape.clone(),
            values,
        };
        Ok(self.push(t, if sub { Op::Sub { a, b } } else { Op::Add { a, b } }))
    }

    /// Elementwise sum; also serves as bias addition.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise(a, b, false)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise(a, b, true)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let xt = &self.nodes[x.0].value;
        let t = Tensor {
            shape: xt.shape.clone(),
            values: xt.values.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
        };
        self.push(t, Op::Relu { x })
    }

    /// 1-D concatenation.
    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let at = &self.nodes[a.0].value;
        let bt = &self.nodes[b.0].value;
        if at.shape.len() != 1 || bt.shape.len() != 1 {
            return Err(CoreError::argument("concat: operands must be vectors"));
        }
        let mut values = Vec::with_capacity(at.len() + bt.len());
        values.extend_from_slice(&at.values);
        values.extend_from_slice(&bt.values);
        Ok(self.push(Tensor::vector(values), Op::Concat { a, b }))
    }

    /// Squared L2 norm of a vector, as a scalar node.
    pub fn l2_norm_sq(&mut self, x: NodeId) -> Result<NodeId> {
        let xt = &self.nodes[x.0].value;
        if xt.shape.len() != 1 {
            return Err(CoreError::argument("l2_norm_sq: operand must be a vector"));
        }
        let v = xt.values.iter().map(|&a| a * a).sum();
        Ok(self.push(Tensor::scalar(v), Op::L2NormSq { x }))
    }

    /// Guarded cosine similarity of two vectors, as a scalar node.
    /// Value and gradient are both zero when either norm is `< 1e-8`.
    pub fn cosine_sim(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let at = &self.nodes[a.0].value;
        let bt = &self.nodes[b.0].value;
        if at.shape.len() != 1 || at.shape != bt.shape {
            return Err(CoreError::argument(format!(
                "cosine_sim: incompatible shapes {:?} vs {:?}",
                at.shape, bt.shape
            )));
        }
        let mut dot = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for (&x, &y) in at.values.iter().zip(bt.values.iter()) {
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
        let na = fmath::sqrt(na);
        let nb = fmath::sqrt(nb);
        let v = if na < COSINE_NORM_EPS || nb < COSINE_NORM_EPS {
            0.0
        } else {
            dot / (na * nb)
        };
        Ok(self.push(Tensor::scalar(v), Op::CosineSim { a, b }))
    }

    /// `max(0, margin - x)` on a scalar node. Subgradient 0 at the kink.
    pub fn hinge(&mut self, x: NodeId, margin: f64) -> Result<NodeId> {
        let xt = &self.nodes[x.0].value;
        if !xt.is_scalar() {
            return Err(CoreError::argument("hinge: operand must be a scalar"));
        }
        let d = margin - xt.as_scalar();
        let v = if d > 0.0 { d } else { 0.0 };
        Ok(self.push(Tensor::scalar(v), Op::Hinge { x, margin }))
    }

    /// Weighted sum of scalar nodes.
    pub fn weighted_sum(&mut self, terms: &[(f64, NodeId)]) -> Result<NodeId> {
        let mut acc = 0.0;
        for &(w, id) in terms {
            let t = &self.nodes[id.0].value;
            if !t.is_scalar() {
                return Err(CoreError::argument("weighted_sum: all terms must be scalars"));
            }
            acc += w * t.as_scalar();
        }
        Ok(self.push(
            Tensor::scalar(acc),
            Op::WeightedSum {
                terms: terms.to_vec(),
            },
        ))
    }

    /// Mean of scalar nodes (empty input yields a constant 0).
    pub fn mean(&mut self, terms: &[NodeId]) -> Result<NodeId> {
        if terms.is_empty() {
            return Ok(self.constant(Tensor::scalar(0.0)));
        }
        let w = 1.0 / terms.len() as f64;
        let weighted: Vec<(f64, NodeId)> = terms.iter().map(|&t| (w, t)).collect();
        self.weighted_sum(&weighted)
    }

    /// Reverse-mode sweep from a scalar loss node. Returns one gradient
    /// tensor per store entry; parameters that do not reach the loss get
    /// zeros.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(CoreError::argument("backward: loss must be a scalar node"));
        }
        let mut adjoints: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.len()])
            .collect();
        adjoints[loss.0][0] = 1.0;

        let mut grads = Gradients::zeros(self.store);

        for i in (0..=loss.0).rev() {
            let g = core::mem::take(&mut adjoints[i]);
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            match &self.nodes[i].op {
                Op::Const => {}
                Op::Param(idx) => {
                    for (acc, &gv) in grads.grads[*idx].values_mut().iter_mut().zip(&g) {
                        *acc += gv;
                    }
                }
                Op::MatVec { w, x } => {
                    let wt = &self.nodes[w.0].value;
                    let xt = &self.nodes[x.0].value;
                    let n = wt.shape[1];
                    // Two outputs share one pass: dW[i] = g[i]*x, dx += g[i]*W[i].
                    let (lo, hi) = if w.0 < x.0 { (w.0, x.0) } else { (x.0, w.0) };
                    let (head, tail) = adjoints.split_at_mut(hi);
                    let (dw, dx): (&mut Vec<f64>, &mut Vec<f64>) = if w.0 < x.0 {
                        (&mut head[lo], &mut tail[0])
                    } else {
                        (&mut tail[0], &mut head[lo])
                    };
                    for (row_idx, &gi) in g.iter().enumerate() {
                        if gi == 0.0 {
                            continue;
                        }
                        let wrow = &wt.values[row_idx * n..(row_idx + 1) * n];
                        let dwrow = &mut dw[row_idx * n..(row_idx + 1) * n];
                        for j in 0..n {
                            dwrow[j] += gi * xt.values[j];
                            dx[j] += gi * wrow[j];
                        }
                    }
                }
                Op::Add { a, b } => {
                    for (acc, &gv) in adjoints[a.0].iter_mut().zip(&g) {
                        *acc += gv;
                    }
                    for (acc, &gv) in adjoints[b.0].iter_mut().zip(&g) {
                        *acc += gv;
                    }
                }
                Op::Sub { a, b } => {
                    for (acc, &gv) in adjoints[a.0].iter_mut().zip(&g) {
                        *acc += gv;
                    }
                    for (acc, &gv) in adjoints[b.0].iter_mut().zip(&g) {
                        *acc -= gv;
                    }
                }
                Op::Relu { x } => {
                    let xt = &self.nodes[x.0].value;
                    for ((acc, &gv), &xv) in
                        adjoints[x.0].iter_mut().zip(&g).zip(&xt.values)
                    {
                        if xv > 0.0 {
                            *acc += gv;
                        }
                    }
                }
                Op::Concat { a, b } => {
                    let alen = self.nodes[a.0].value.len();
                    for (acc, &gv) in adjoints[a.0].iter_mut().zip(&g[..alen]) {
                        *acc += gv;
                    }
                    for (acc, &gv) in adjoints[b.0].iter_mut().zip(&g[alen..]) {
                        *acc += gv;
                    }
                }
                Op::L2NormSq { x } => {
                    let gs = g[0];
                    let xt = &self.nodes[x.0].value;
                    for (acc, &xv) in adjoints[x.0].iter_mut().zip(&xt.values) {
                        *acc += 2.0 * xv * gs;
                    }
                }
                Op::CosineSim { a, b } => {
                    let gs = g[0];
                    let at = &self.nodes[a.0].value;
                    let bt = &self.nodes[b.0].value;
                    let mut dot = 0.0;
                    let mut na2 = 0.0;
                    let mut nb2 = 0.0;
                    for (&x, &y) in at.values.iter().zip(bt.values.iter()) {
                        dot += x * y;
                        na2 += x * x;
                        nb2 += y * y;
                    }
                    let na = fmath::sqrt(na2);
                    let nb = fmath::sqrt(nb2);
                    if na < COSINE_NORM_EPS || nb < COSINE_NORM_EPS {
                        // Guarded region: the op is the constant 0 there.
                        continue;
                    }
                    let c = dot / (na * nb);
                    let inv = 1.0 / (na * nb);
                    for (acc, (&av, &bv)) in adjoints[a.0]
                        .iter_mut()
                        .zip(at.values.iter().zip(bt.values.iter()))
                    {
                        *acc += gs * (bv * inv - c * av / na2);
                    }
                    for (acc, (&av, &bv)) in adjoints[b.0]
                        .iter_mut()
                        .zip(at.values.iter().zip(bt.values.iter()))
                    {
                        *acc += gs * (av * inv - c * bv / nb2);
                    }
                }
                Op::Hinge { x, margin } => {
                    let gs = g[0];
                    let xv = self.nodes[x.0].value.as_scalar();
                    // Active iff margin - x > 0; derivative there is -1.
                    if margin - xv > 0.0 {
                        adjoints[x.0][0] -= gs;
                    }
                }
                Op::WeightedSum { terms } => {
                    let gs = g[0];
                    for &(w, id) in terms {
                        adjoints[id.0][0] += w * gs;
                    }
                }
            }
        }
        Ok(grads)
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One adaptive-moment update with bias correction over every parameter.
pub fn adam_step(store: &mut ParamStore, grads: &Gradients, lr: f64, cfg: &AdamConfig) {
    for (entry, grad) in store.entries.iter_mut().zip(grads.grads.iter()) {
        entry.step += 1;
        let t = entry.step;
        let bc1 = 1.0 - fmath::powi(cfg.beta1, t as i32);
        let bc2 = 1.0 - fmath::powi(cfg.beta2, t as i32);
        let m = entry.first_moment.values_mut();
        let v = entry.second_moment.values_mut();
        let p = entry.value.values_mut();
        for ((pi, (mi, vi)), &gi) in p
            .iter_mut()
            .zip(m.iter_mut().zip(v.iter_mut()))
            .zip(grad.values())
        {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            let mhat = *mi / bc1;
            let vhat = *vi / bc2;
            *pi -= lr * mhat / (fmath::sqrt(vhat) + cfg.eps);
        }
    }
}

/// Central finite differences over every parameter coordinate, compared
/// against `analytic`. Returns the max relative error
/// `|g_a - g_n| / max(1e-8, |g_a| + |g_n|)`.
pub fn grad_check<F>(
    store: &mut ParamStore,
    analytic: &Gradients,
    eps: f64,
    mut f: F,
) -> f64
where
    F: FnMut(&ParamStore) -> f64,
{
    let mut max_rel = 0.0f64;
    for entry_idx in 0..store.entries.len() {
        for coord in 0..store.entries[entry_idx].value.len() {
            let orig = store.entries[entry_idx].value.values()[coord];
            store.entries[entry_idx].value.values_mut()[coord] = orig + eps;
            let fp = f(store);
            store.entries[entry_idx].value.values_mut()[coord] = orig - eps;
            let fm = f(store);
            store.entries[entry_idx].value.values_mut()[coord] = orig;
            let gn = (fp - fm) / (2.0 * eps);
            let ga = analytic.grads[entry_idx].values()[coord];
            let rel = (ga - gn).abs() / (1e-8f64).max(ga.abs() + gn.abs());
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    max_rel
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(name: &str, t: Tensor) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert(name, t).unwrap();
        s
    }

    #[test]
    fn relu_forward() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.constant(Tensor::vector(vec![-1.0, 0.0, 2.0]));
        let y = tape.relu(x);
        assert_eq!(tape.value(y).values(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn hinge_zero_at_boundary_with_zero_gradient() {
        let store = store_with("x", Tensor::scalar(0.5));
        let mut tape = Tape::new(&store);
        let x = tape.param("x").unwrap();
        let h = tape.hinge(x, 0.5).unwrap();
        assert_eq!(tape.scalar(h), 0.0);
        let grads = tape.backward(h).unwrap();
        assert_eq!(grads.of(&store, "x").unwrap().values(), &[0.0]);
    }

    #[test]
    fn hinge_gradient_zero_when_inactive() {
        let store = store_with("x", Tensor::scalar(2.0));
        let mut tape = Tape::new(&store);
        let x = tape.param("x").unwrap();
        let h = tape.hinge(x, 0.5).unwrap();
        assert_eq!(tape.scalar(h), 0.0);
        let grads = tape.backward(h).unwrap();
        assert_eq!(grads.of(&store, "x").unwrap().values(), &[0.0]);
    }

    #[test]
    fn l2_norm_sq_forward_and_grad() {
        let store = store_with("p", Tensor::vector(vec![3.0, 4.0]));
        let mut tape = Tape::new(&store);
        let p = tape.param("p").unwrap();
        let n = tape.l2_norm_sq(p).unwrap();
        assert_eq!(tape.scalar(n), 25.0);
        let grads = tape.backward(n).unwrap();
        assert_eq!(grads.of(&store, "p").unwrap().values(), &[6.0, 8.0]);
    }

    #[test]
    fn norm_sq_gradient_analytic() {
        let store = store_with("p", Tensor::vector(vec![1.0, 2.0]));
        let mut tape = Tape::new(&store);
        let p = tape.param("p").unwrap();
        let n = tape.l2_norm_sq(p).unwrap();
        let grads = tape.backward(n).unwrap();
        assert_eq!(grads.of(&store, "p").unwrap().values(), &[2.0, 4.0]);
    }

    #[test]
    fn cosine_gradient_vanishes_at_parallel_vectors() {
        let store = store_with("u", Tensor::vector(vec![1.0, 2.0, -1.0]));
        let mut tape = Tape::new(&store);
        let u = tape.param("u").unwrap();
        let v = tape.constant(Tensor::vector(vec![1.0, 2.0, -1.0]));
        let c = tape.cosine_sim(u, v).unwrap();
        assert!((tape.scalar(c) - 1.0).abs() < 1e-12);
        let grads = tape.backward(c).unwrap();
        for &g in grads.of(&store, "u").unwrap().values() {
            assert!(g.abs() < 1e-12, "grad {g}");
        }
    }

    #[test]
    fn cosine_guard_gives_zero_value_and_gradient() {
        let store = store_with("u", Tensor::vector(vec![0.0, 0.0]));
        let mut tape = Tape::new(&store);
        let u = tape.param("u").unwrap();
        let v = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        let c = tape.cosine_sim(u, v).unwrap();
        assert_eq!(tape.scalar(c), 0.0);
        let grads = tape.backward(c).unwrap();
        assert_eq!(grads.of(&store, "u").unwrap().values(), &[0.0, 0.0]);
    }

    #[test]
    fn unreached_parameters_get_zero_gradient() {
        let mut store = ParamStore::new();
        store.insert("used", Tensor::vector(vec![1.0, 1.0])).unwrap();
        store.insert("unused", Tensor::vector(vec![5.0])).unwrap();
        let mut tape = Tape::new(&store);
        let p = tape.param("used").unwrap();
        let n = tape.l2_norm_sq(p).unwrap();
        let grads = tape.backward(n).unwrap();
        assert_eq!(grads.of(&store, "unused").unwrap().values(), &[0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let store = store_with("p", Tensor::vector(vec![1.0, 2.0]));
        let mut tape = Tape::new(&store);
        let p = tape.param("p").unwrap();
        assert!(tape.backward(p).is_err());
    }

    fn tiny_mlp_loss(store: &ParamStore, input: &[f64], target: &[f64]) -> (f64, Gradients) {
        let mut tape = Tape::new(store);
        let x = tape.constant(Tensor::vector(input.to_vec()));
        let w0 = tape.param("w0").unwrap();
        let b0 = tape.param("b0").unwrap();
        let w1 = tape.param("w1").unwrap();
        let b1 = tape.param("b1").unwrap();
        let h = tape.matvec(w0, x).unwrap();
        let h = tape.add(h, b0).unwrap();
        let h = tape.relu(h);
        let y = tape.matvec(w1, h).unwrap();
        let y = tape.add(y, b1).unwrap();
        let t = tape.constant(Tensor::vector(target.to_vec()));
        let d = tape.sub(y, t).unwrap();
        let loss = tape.l2_norm_sq(d).unwrap();
        let grads = tape.backward(loss).unwrap();
        (tape.scalar(loss), grads)
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let mut rng = crate::rng::SeedRng::seed_from_u64(33);
        let (din, dh, dout) = (4, 5, 3);
        let mut store = ParamStore::new();
        store
            .insert(
                "w0",
                Tensor::matrix(dh, din, (0..dh * din).map(|_| rng.normal() * 0.5).collect())
                    .unwrap(),
            )
            .unwrap();
        store
            .insert("b0", Tensor::vector((0..dh).map(|_| rng.normal() * 0.1).collect()))
            .unwrap();
        store
            .insert(
                "w1",
                Tensor::matrix(dout, dh, (0..dout * dh).map(|_| rng.normal() * 0.5).collect())
                    .unwrap(),
            )
            .unwrap();
        store
            .insert("b1", Tensor::vector((0..dout).map(|_| rng.normal() * 0.1).collect()))
            .unwrap();
        let input: Vec<f64> = (0..din).map(|_| rng.normal()).collect();
        let target: Vec<f64> = (0..dout).map(|_| rng.normal()).collect();

        let (_, analytic) = tiny_mlp_loss(&store, &input, &target);
        let max_rel = grad_check(&mut store, &analytic, 1e-5, |s| {
            tiny_mlp_loss(s, &input, &target).0
        });
        assert!(max_rel < 1e-4, "max relative error {max_rel}");
    }

    #[test]
    fn grad_check_quadratic_is_tight() {
        let mut store = store_with("p", Tensor::vector(vec![0.7, -1.3, 2.2]));
        let eval = |s: &ParamStore| {
            let mut tape = Tape::new(s);
            let p = tape.param("p").unwrap();
            let n = tape.l2_norm_sq(p).unwrap();
            tape.scalar(n)
        };
        let mut tape = Tape::new(&store);
        let p = tape.param("p").unwrap();
        let n = tape.l2_norm_sq(p).unwrap();
        let analytic = tape.backward(n).unwrap();
        drop(tape);
        let max_rel = grad_check(&mut store, &analytic, 1e-5, eval);
        assert!(max_rel < 1e-8, "max relative error {max_rel}");
    }

    #[test]
    fn grad_check_constant_function_is_zero() {
        let mut store = store_with("p", Tensor::vector(vec![1.0, 2.0]));
        let analytic = Gradients::zeros(&store);
        let max_rel = grad_check(&mut store, &analytic, 1e-5, |_| 3.5);
        assert_eq!(max_rel, 0.0);
    }

    #[test]
    fn backward_is_bitwise_deterministic() {
        let mut rng = crate::rng::SeedRng::seed_from_u64(8);
        let mut store = ParamStore::new();
        store
            .insert(
                "w0",
                Tensor::matrix(3, 3, (0..9).map(|_| rng.normal()).collect()).unwrap(),
            )
            .unwrap();
        store
            .insert("b0", Tensor::vector(vec![0.1, -0.2, 0.3]))
            .unwrap();
        store
            .insert("w1", Tensor::matrix(2, 3, (0..6).map(|_| rng.normal()).collect()).unwrap())
            .unwrap();
        store.insert("b1", Tensor::vector(vec![0.0, 0.0])).unwrap();
        let input = [0.3, -0.6, 0.9];
        let target = [1.0, -1.0];
        let (l1, g1) = tiny_mlp_loss(&store, &input, &target);
        let (l2, g2) = tiny_mlp_loss(&store, &input, &target);
        assert_eq!(l1.to_bits(), l2.to_bits());
        assert_eq!(g1, g2);
    }

    #[test]
    fn adam_zero_gradient_only_bumps_step() {
        let mut store = store_with("p", Tensor::vector(vec![1.0, -2.0]));
        let grads = Gradients::zeros(&store);
        adam_step(&mut store, &grads, 0.1, &AdamConfig::default());
        assert_eq!(store.get("p").unwrap().values(), &[1.0, -2.0]);
        assert_eq!(store.step_of("p"), Some(1));
    }

    #[test]
    fn adam_first_step_is_signed_learning_rate() {
        let mut store = store_with("p", Tensor::vector(vec![0.0, 0.0]));
        let mut grads = Gradients::zeros(&store);
        grads.grads[0].values_mut().copy_from_slice(&[3.0, -0.7]);
        let lr = 0.05;
        adam_step(&mut store, &grads, lr, &AdamConfig::default());
        let p = store.get("p").unwrap().values();
        assert!((p[0] + lr).abs() < 1e-6, "p0 = {}", p[0]);
        assert!((p[1] - lr).abs() < 1e-6, "p1 = {}", p[1]);
    }

    #[test]
    fn adam_matches_reference_trace_on_quadratic() {
        // Reference: scalar Adam written independently below.
        let mut store = store_with("x", Tensor::scalar(5.0));
        let cfg = AdamConfig::default();
        // Small enough that 100 steps stay well away from the oscillation
        // zone around the minimum.
        let lr = 0.01;

        let mut rx = 5.0f64;
        let (mut rm, mut rv) = (0.0f64, 0.0f64);
        let mut impl_trace = Vec::new();
        let mut ref_trace = Vec::new();
        let mut prev_obj = f64::INFINITY;
        for t in 1..=100 {
            // Implementation step on f(x) = x^2 with the exact gradient.
            let xv = store.get("x").unwrap().as_scalar();
            let mut g = Gradients::zeros(&store);
            g.grads[0].values_mut()[0] = 2.0 * xv;
            adam_step(&mut store, &g, lr, &cfg);
            impl_trace.push(store.get("x").unwrap().as_scalar());

            // Reference step.
            let gr = 2.0 * rx;
            rm = cfg.beta1 * rm + (1.0 - cfg.beta1) * gr;
            rv = cfg.beta2 * rv + (1.0 - cfg.beta2) * gr * gr;
            let mhat = rm / (1.0 - cfg.beta1.powi(t));
            let vhat = rv / (1.0 - cfg.beta2.powi(t));
            rx -= lr * mhat / (vhat.sqrt() + cfg.eps);
            ref_trace.push(rx);

            let obj = impl_trace.last().unwrap().powi(2);
            if t > 5 {
                assert!(obj <= prev_obj + 1e-12, "objective rose at step {t}");
            }
            prev_obj = obj;
        }
        for (a, b) in impl_trace.iter().zip(&ref_trace) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn concat_splits_gradient() {
        let mut store = ParamStore::new();
        store.insert("a", Tensor::vector(vec![1.0, 2.0])).unwrap();
        store.insert("b", Tensor::vector(vec![3.0])).unwrap();
        let mut tape = Tape::new(&store);
        let a = tape.param("a").unwrap();
        let b = tape.param("b").unwrap();
        let c = tape.concat(a, b).unwrap();
        let n = tape.l2_norm_sq(c).unwrap();
        let grads = tape.backward(n).unwrap();
        assert_eq!(grads.of(&store, "a").unwrap().values(), &[2.0, 4.0]);
        assert_eq!(grads.of(&store, "b").unwrap().values(), &[6.0]);
    }

    #[test]
    fn shape_mismatches_error() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let a = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        let b = tape.constant(Tensor::vector(vec![1.0]));
        assert!(tape.add(a, b).is_err());
        assert!(tape.cosine_sim(a, b).is_err());
        let m = tape.constant(Tensor::matrix(2, 2, vec![1.0; 4]).unwrap());
        assert!(tape.matvec(m, b).is_err());
    }
}
