//! Plain MLP over the autodiff kernel: relu hidden layers, linear output.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::autodiff::{NodeId, ParamStore, Tape, Tensor};
use crate::error::{CoreError, Result};
use crate::fmath;
use crate::rng::SeedRng;

/// Fully connected network described by its layer widths
/// (`dims[0]` inputs through `dims.last()` outputs).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    prefix: String,
    dims: Vec<usize>,
}

impl Mlp {
    pub fn new(prefix: impl Into<String>, dims: Vec<usize>) -> Self {
        debug_assert!(dims.len() >= 2, "an MLP needs at least input and output dims");
        Mlp {
            prefix: prefix.into(),
            dims,
        }
    }

    pub fn layer_count(&self) -> usize {
        self.dims.len() - 1
    }

    fn weight_name(&self, layer: usize) -> String {
        format!("{}.w{layer}", self.prefix)
    }

    fn bias_name(&self, layer: usize) -> String {
        format!("{}.b{layer}", self.prefix)
    }

    /// Registers weights with uniform fan-in scaling `U(-1/sqrt(n), 1/sqrt(n))`
    /// and zero biases.
    pub fn register(&self, store: &mut ParamStore, rng: &mut SeedRng) -> Result<()> {
        for layer in 0..self.layer_count() {
            let (n_in, n_out) = (self.dims[layer], self.dims[layer + 1]);
            let bound = 1.0 / fmath::sqrt(n_in as f64);
            let weights: Vec<f64> = (0..n_out * n_in)
                .map(|_| rng.uniform_in(-bound, bound))
                .collect();
            store.insert(self.weight_name(layer), Tensor::matrix(n_out, n_in, weights)?)?;
            store.insert(self.bias_name(layer), Tensor::vector(alloc::vec![0.0; n_out]))?;
        }
        Ok(())
    }

    /// Pulls every layer's parameters onto the tape once; reuse the handles
    /// across many forward passes within one step.
    pub fn pull_params(&self, tape: &mut Tape<'_>) -> Result<Vec<(NodeId, NodeId)>> {
        (0..self.layer_count())
            .map(|layer| {
                let w = tape.param(&self.weight_name(layer))?;
                let b = tape.param(&self.bias_name(layer))?;
                Ok((w, b))
            })
            .collect()
    }

    /// Forward pass over pre-pulled parameter nodes; relu between layers,
    /// linear last.
    pub fn forward_with(
        &self,
        tape: &mut Tape<'_>,
        layers: &[(NodeId, NodeId)],
        input: NodeId,
    ) -> Result<NodeId> {
        let last = self.layer_count() - 1;
        let mut h = input;
        for (layer, &(w, b)) in layers.iter().enumerate() {
            let lin = tape.matvec(w, h)?;
            h = tape.add(lin, b)?;
            if layer != last {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }

    /// Records the forward pass on a tape (pull + forward in one shot).
    pub fn forward_tape(&self, tape: &mut Tape<'_>, input: NodeId) -> Result<NodeId> {
        let layers = self.pull_params(tape)?;
        self.forward_with(tape, &layers, input)
    }

    /// Tape-free forward pass for inference.
    pub fn forward_plain(&self, store: &ParamStore, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.dims[0] {
            return Err(CoreError::argument(format!(
                "mlp {}: input dimension {} != {}",
                self.prefix,
                input.len(),
                self.dims[0]
            )));
        }
        let last = self.layer_count() - 1;
        let mut h = input.to_vec();
        for layer in 0..self.layer_count() {
            let w = store
                .get(&self.weight_name(layer))
                .ok_or_else(|| CoreError::argument(format!("missing {}", self.weight_name(layer))))?;
            let b = store
                .get(&self.bias_name(layer))
                .ok_or_else(|| CoreError::argument(format!("missing {}", self.bias_name(layer))))?;
            let n_in = self.dims[layer];
            let n_out = self.dims[layer + 1];
            let mut next = Vec::with_capacity(n_out);
            for (row, bias) in w.values().chunks_exact(n_in).zip(b.values()) {
                let mut acc = 0.0;
                for (a, x) in row.iter().zip(h.iter()) {
                    acc += a * x;
                }
                let v = acc + bias;
                next.push(if layer != last && v < 0.0 { 0.0 } else { v });
            }
            h = next;
        }
        Ok(h)
    }
}
