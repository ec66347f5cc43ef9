//! The continuous-time manifold model: sinusoidal time encoding, the paper
//! mapper and topic-spine networks, the three geometric losses, and the
//! training loop.
//!
//! A paper embeds as `z = mapper(x ++ enc(t))`; topic `k` traces the spine
//! `mu_k(t) = spine(E_k ++ enc(t))`. Momentum is the backward finite
//! difference `mu_k(t') - mu_k(t' - dt)` in normalized time, not divided by
//! `dt`.

mod loss;
mod net;
mod train;

pub use loss::{batch_losses, loss_inspire, loss_spine, loss_vanguard, BatchSelection, StepLosses};
pub use net::Mlp;
pub use train::{
    build_train_context, train, EpochTrace, TrainContext, TrainOutcome, TrainPaper,
};

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::corpus::Days;
use crate::embedding::TopicModel;
use crate::error::{CoreError, Result};
use crate::fmath;
use crate::rng::{RngState, SeedRng};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Default geometric-frequency base for the time encoder. Below 1 so the
/// slowest channel stays monotone over the normalization window, which makes
/// the encoding injective on [0, 1].
pub const DEFAULT_TIME_BASE: f64 = 0.8;

/// Sinusoidal time-encoding parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeEncoderConfig {
    /// Output dimension; must be even (sin/cos pairs).
    pub d_time: usize,
    /// Normalization window: `t_min` maps to 0, `t_max` to 1. Inputs outside
    /// the window extrapolate.
    pub t_min: Days,
    pub t_max: Days,
    /// Geometric frequency base; pair `j` oscillates at `base^j` cycles per
    /// window.
    pub base: f64,
}

impl Default for TimeEncoderConfig {
    fn default() -> Self {
        TimeEncoderConfig {
            d_time: 64,
            t_min: 0.0,
            t_max: 1.0,
            base: DEFAULT_TIME_BASE,
        }
    }
}

impl TimeEncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_time == 0 || self.d_time % 2 != 0 {
            return Err(CoreError::argument("time encoder: d_time must be even and >= 2"));
        }
        if !(self.t_max > self.t_min) {
            return Err(CoreError::argument("time encoder: t_max must exceed t_min"));
        }
        if !(self.base > 0.0) || !self.base.is_finite() {
            return Err(CoreError::argument("time encoder: base must be positive"));
        }
        Ok(())
    }

    pub fn normalize(&self, t: Days) -> f64 {
        (t - self.t_min) / (self.t_max - self.t_min)
    }
}

/// Encodes normalized time as interleaved sin/cos at `d_time / 2` geometric
/// frequencies: pair `j` is `(sin, cos)` of `2 pi base^j t'`.
pub fn time_encode_normalized(t_prime: f64, cfg: &TimeEncoderConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(cfg.d_time);
    let mut freq = 1.0;
    for _ in 0..cfg.d_time / 2 {
        let angle = 2.0 * core::f64::consts::PI * freq * t_prime;
        out.push(fmath::sin(angle));
        out.push(fmath::cos(angle));
        freq *= cfg.base;
    }
    out
}

/// Encodes a raw timestamp (normalizes first).
pub fn time_encode(t: Days, cfg: &TimeEncoderConfig) -> Vec<f64> {
    time_encode_normalized(cfg.normalize(t), cfg)
}

/// Dimensions of the two networks and the latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    /// Input (semantic embedding) dimension of the mapper.
    pub embed_dim: usize,
    /// Learnable topic base dimension.
    pub d_topic: usize,
    /// Latent output dimension shared by mapper and spine.
    pub d_z: usize,
    /// Hidden widths shared by both networks.
    pub hidden: Vec<usize>,
}

/// Coefficients of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 1.0,
            beta: 0.1,
            gamma: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 || self.gamma < 0.0 {
            return Err(CoreError::argument("loss weights must be nonnegative"));
        }
        Ok(())
    }
}

/// Vanguard-loss parameters: neighborhood half-width and margin floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanguardConfig {
    /// Same-topic papers within this many days form the neighborhood.
    pub tau_time_days: Days,
    /// Margin floor; the dynamic margin is
    /// `delta_base + (1 - delta_base) * w_norm`.
    pub delta_base: f64,
}

impl Default for VanguardConfig {
    fn default() -> Self {
        VanguardConfig {
            tau_time_days: 90.0,
            delta_base: 0.0,
        }
    }
}

impl VanguardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_time_days > 0.0) {
            return Err(CoreError::argument("vanguard: tau_time_days must be positive"));
        }
        Ok(())
    }
}

/// Whether batch losses are averaged (default) or summed as written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

/// Full training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub learning_rate: f64,
    /// Backward-difference step in normalized time.
    pub delta_t: f64,
    /// Inspiration alignment margin.
    pub delta_align: f64,
    pub vanguard: VanguardConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// One batch per epoch containing every paper and edge.
    pub full_batch: bool,
    pub reduction: Reduction,
    pub seed: u64,
    pub d_time: usize,
    pub time_base: f64,
    pub d_topic: usize,
    pub d_z: usize,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            weights: LossWeights::default(),
            learning_rate: 1e-4,
            delta_t: 0.01,
            delta_align: 0.5,
            vanguard: VanguardConfig::default(),
            epochs: 200,
            batch_size: 256,
            full_batch: false,
            reduction: Reduction::Mean,
            seed: 0,
            d_time: 64,
            time_base: DEFAULT_TIME_BASE,
            d_topic: 128,
            d_z: 128,
            hidden: alloc::vec![256, 256],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.vanguard.validate()?;
        if !(self.delta_t > 0.0) {
            return Err(CoreError::argument("train: delta_t must be positive"));
        }
        if self.epochs == 0 {
            return Err(CoreError::argument("train: epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(CoreError::argument("train: batch_size must be >= 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(CoreError::argument("train: learning_rate must be positive"));
        }
        Ok(())
    }
}

/// The trained (or freshly initialized) model: both networks, the per-topic
/// bases, and the time encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldModel {
    pub arch: ArchConfig,
    pub time: TimeEncoderConfig,
    pub k_topics: usize,
    pub params: ParamStore,
}

pub(crate) fn topic_base_name(k: usize) -> String {
    alloc::format!("topic.base.{k}")
}

impl ManifoldModel {
    /// Fresh model with uniform fan-in weights, zero biases, and small
    /// normal topic bases. Registration order is fixed (mapper, spine,
    /// topic bases) so a seed pins every parameter.
    pub fn init(
        arch: ArchConfig,
        time: TimeEncoderConfig,
        k_topics: usize,
        rng: &mut SeedRng,
    ) -> Result<Self> {
        time.validate()?;
        if arch.d_z == 0 || arch.d_topic == 0 {
            return Err(CoreError::argument("arch: d_z and d_topic must be positive"));
        }
        let mut params = ParamStore::new();
        Self::mapper_net(&arch, &time).register(&mut params, rng)?;
        Self::spine_net(&arch, &time).register(&mut params, rng)?;
        for k in 0..k_topics {
            let base: Vec<f64> = (0..arch.d_topic).map(|_| rng.normal() * 0.01).collect();
            params.insert(topic_base_name(k), crate::autodiff::Tensor::vector(base))?;
        }
        Ok(ManifoldModel {
            arch,
            time,
            k_topics,
            params,
        })
    }

    pub fn mapper_net(arch: &ArchConfig, time: &TimeEncoderConfig) -> Mlp {
        let mut dims = alloc::vec![arch.embed_dim + time.d_time];
        dims.extend_from_slice(&arch.hidden);
        dims.push(arch.d_z);
        Mlp::new("mapper", dims)
    }

    pub fn spine_net(arch: &ArchConfig, time: &TimeEncoderConfig) -> Mlp {
        let mut dims = alloc::vec![arch.d_topic + time.d_time];
        dims.extend_from_slice(&arch.hidden);
        dims.push(arch.d_z);
        Mlp::new("spine", dims)
    }

    fn mapper(&self) -> Mlp {
        Self::mapper_net(&self.arch, &self.time)
    }

    fn spine(&self) -> Mlp {
        Self::spine_net(&self.arch, &self.time)
    }

    /// Latent embedding of a paper: mapper over `x ++ enc(t)`.
    pub fn map_paper(&self, x: &[f64], t: Days) -> Result<Vec<f64>> {
        if x.len() != self.arch.embed_dim {
            return Err(CoreError::argument(alloc::format!(
                "map_paper: embedding dimension {} != {}",
                x.len(),
                self.arch.embed_dim
            )));
        }
        let mut input = Vec::with_capacity(x.len() + self.time.d_time);
        input.extend_from_slice(x);
        input.extend(time_encode(t, &self.time));
        self.mapper().forward_plain(&self.params, &input)
    }

    /// Spine point of topic `k` at raw time `t`.
    pub fn spine_at(&self, k: usize, t: Days) -> Result<Vec<f64>> {
        self.spine_at_normalized(k, self.time.normalize(t))
    }

    /// Spine point at normalized time `t'`.
    pub fn spine_at_normalized(&self, k: usize, t_prime: f64) -> Result<Vec<f64>> {
        if k >= self.k_topics {
            return Err(CoreError::argument(alloc::format!(
                "spine_at: topic {k} out of range (K = {})",
                self.k_topics
            )));
        }
        let base = self
            .params
            .get(&topic_base_name(k))
            .expect("topic base registered")
            .values();
        let mut input = Vec::with_capacity(base.len() + self.time.d_time);
        input.extend_from_slice(base);
        input.extend(time_encode_normalized(t_prime, &self.time));
        self.spine().forward_plain(&self.params, &input)
    }

    /// Backward finite difference of the spine at raw time `t`:
    /// `mu(t') - mu(t' - dt)` (not divided by `dt`).
    pub fn spine_momentum(&self, k: usize, t: Days, dt: f64) -> Result<Vec<f64>> {
        let t_prime = self.time.normalize(t);
        let now = self.spine_at_normalized(k, t_prime)?;
        let before = self.spine_at_normalized(k, t_prime - dt)?;
        Ok(now.iter().zip(&before).map(|(a, b)| a - b).collect())
    }
}

/// Self-describing training artifact; round-trips bit-exactly through JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub schema_version: u32,
    pub activation: String,
    pub train_config: TrainConfig,
    pub metric_params: crate::corpus::MetricParams,
    pub cutoff_days: Days,
    pub arch: ArchConfig,
    pub time: TimeEncoderConfig,
    pub topic_model: TopicModel,
    pub params: ParamStore,
    pub rng_state: RngState,
}

impl ModelCheckpoint {
    pub fn model(&self) -> ManifoldModel {
        ManifoldModel {
            arch: self.arch.clone(),
            time: self.time,
            k_topics: self.topic_model.k,
            params: self.params.clone(),
        }
    }
}

/// Median of the impact weights in each paper's same-topic temporal
/// neighborhood (the paper itself included). Even-sized neighborhoods take
/// the mean of the two middle values. The results are constants during
/// training; no gradient flows through them.
pub fn compute_neighborhood_medians(
    topics: &[usize],
    times: &[Days],
    weights: &[f64],
    cfg: &VanguardConfig,
) -> Result<Vec<f64>> {
    if topics.len() != times.len() || topics.len() != weights.len() {
        return Err(CoreError::argument(
            "neighborhood medians: topics/times/weights must be parallel",
        ));
    }
    cfg.validate()?;
    let n = topics.len();
    let mut medians = Vec::with_capacity(n);
    let mut bucket: Vec<f64> = Vec::new();
    for i in 0..n {
        bucket.clear();
        for j in 0..n {
            if topics[j] == topics[i] && (times[j] - times[i]).abs() <= cfg.tau_time_days {
                bucket.push(weights[j]);
            }
        }
        medians.push(median_of(&mut bucket));
    }
    Ok(medians)
}

pub(crate) fn median_of(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use alloc::vec;

    #[test]
    fn encoding_at_t_min_is_all_cos_one() {
        let cfg = TimeEncoderConfig {
            d_time: 8,
            t_min: 100.0,
            t_max: 200.0,
            base: 0.8,
        };
        let enc = time_encode(100.0, &cfg);
        for pair in enc.chunks_exact(2) {
            assert_eq!(pair[0], 0.0);
            assert_eq!(pair[1], 1.0);
        }
    }

    #[test]
    fn encoding_quarter_cycle() {
        // One sin/cos pair at one cycle per window: t' = 0.25 lands on
        // (sin, cos) of pi/2.
        let cfg = TimeEncoderConfig {
            d_time: 2,
            t_min: 0.0,
            t_max: 1.0,
            base: 123.0,
        };
        let enc = time_encode_normalized(0.25, &cfg);
        assert!((enc[0] - 1.0).abs() < 1e-12);
        assert!(enc[1].abs() < 1e-12);
    }

    #[test]
    fn encoder_validation() {
        let mut cfg = TimeEncoderConfig::default();
        cfg.d_time = 3;
        assert!(cfg.validate().is_err());
        cfg.d_time = 4;
        cfg.t_max = cfg.t_min;
        assert!(cfg.validate().is_err());
    }

    fn tiny_model(seed: u64) -> ManifoldModel {
        let mut rng = SeedRng::seed_from_u64(seed);
        ManifoldModel::init(
            ArchConfig {
                embed_dim: 3,
                d_topic: 4,
                d_z: 5,
                hidden: vec![6],
            },
            TimeEncoderConfig {
                d_time: 4,
                t_min: 0.0,
                t_max: 100.0,
                base: 0.8,
            },
            2,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn map_paper_is_deterministic_and_checks_dims() {
        let model = tiny_model(1);
        let x = [0.3, -0.2, 0.9];
        let a = model.map_paper(&x, 42.0).unwrap();
        let b = model.map_paper(&x, 42.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(model.map_paper(&[1.0], 42.0).is_err());
    }

    #[test]
    fn zero_output_layer_maps_everything_to_zero() {
        let mut model = tiny_model(2);
        let w_out = model.params.get_mut("mapper.w1").unwrap();
        w_out.values_mut().fill(0.0);
        let b_out = model.params.get_mut("mapper.b1").unwrap();
        b_out.values_mut().fill(0.0);
        let z = model.map_paper(&[1.0, 2.0, 3.0], 10.0).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_mapper_passes_embedding_through() {
        // Single linear layer [d + d_time] -> d_z with W = [I | 0].
        let mut rng = SeedRng::seed_from_u64(3);
        let mut model = ManifoldModel::init(
            ArchConfig {
                embed_dim: 3,
                d_topic: 2,
                d_z: 4,
                hidden: vec![],
            },
            TimeEncoderConfig {
                d_time: 2,
                t_min: 0.0,
                t_max: 1.0,
                base: 0.8,
            },
            1,
            &mut rng,
        )
        .unwrap();
        let w = model.params.get_mut("mapper.w0").unwrap();
        w.values_mut().fill(0.0);
        for i in 0..3 {
            // Row-major [4, 5]: row i, column i.
            w.values_mut()[i * 5 + i] = 1.0;
        }
        let z = model.map_paper(&[7.0, 0.0, -2.0], 0.3).unwrap();
        assert_eq!(z, vec![7.0, 0.0, -2.0, 0.0]);
    }

    #[test]
    fn spine_linear_net_matches_manual_product() {
        let mut rng = SeedRng::seed_from_u64(4);
        let model = ManifoldModel::init(
            ArchConfig {
                embed_dim: 2,
                d_topic: 3,
                d_z: 2,
                hidden: vec![],
            },
            TimeEncoderConfig {
                d_time: 2,
                t_min: 0.0,
                t_max: 10.0,
                base: 0.8,
            },
            1,
            &mut rng,
        )
        .unwrap();
        let t = 4.0;
        let got = model.spine_at(0, t).unwrap();

        // Oracle: manual W x + b over the concatenated input.
        let base = model.params.get("topic.base.0").unwrap().values().to_vec();
        let mut input = base;
        input.extend(time_encode(t, &model.time));
        let w = model.params.get("spine.w0").unwrap();
        let b = model.params.get("spine.b0").unwrap();
        let mut expect = vec![0.0; 2];
        for (i, e) in expect.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &xv) in input.iter().enumerate() {
                acc += w.values()[i * input.len() + j] * xv;
            }
            *e = acc + b.values()[i];
        }
        assert_eq!(got, expect);
    }

    #[test]
    fn constant_spine_has_zero_momentum() {
        let mut model = tiny_model(5);
        for layer in ["spine.w0", "spine.w1"] {
            model.params.get_mut(layer).unwrap().values_mut().fill(0.0);
        }
        let bias = model.params.get_mut("spine.b1").unwrap();
        for (i, v) in bias.values_mut().iter_mut().enumerate() {
            *v = i as f64;
        }
        let mom = model.spine_momentum(0, 50.0, 0.01).unwrap();
        assert!(mom.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn momentum_matches_two_explicit_spine_calls() {
        let model = tiny_model(6);
        let (k, t, dt) = (1usize, 33.0, 0.01);
        let mom = model.spine_momentum(k, t, dt).unwrap();
        let tp = model.time.normalize(t);
        let now = model.spine_at_normalized(k, tp).unwrap();
        let before = model.spine_at_normalized(k, tp - dt).unwrap();
        for ((m, a), b) in mom.iter().zip(&now).zip(&before) {
            assert_eq!(*m, a - b);
        }
    }

    #[test]
    fn same_seed_same_model() {
        let a = tiny_model(7);
        let b = tiny_model(7);
        assert_eq!(a, b);
    }

    #[test]
    fn medians_singleton_and_odd_and_even() {
        let cfg = VanguardConfig {
            tau_time_days: 10.0,
            delta_base: 0.0,
        };
        // Paper 0 isolated by topic; papers 1-3 share topic and overlap in
        // time.
        let topics = [0usize, 1, 1, 1];
        let times = [0.0, 100.0, 105.0, 95.0];
        let weights = [7.0, 1.0, 2.0, 3.0];
        let m = compute_neighborhood_medians(&topics, &times, &weights, &cfg).unwrap();
        assert_eq!(m[0], 7.0);
        assert_eq!(m[1], 2.0);

        // Even-sized neighborhood: mean of the two middle values.
        let topics = [0usize, 0, 0, 0];
        let times = [0.0, 1.0, 2.0, 3.0];
        let weights = [1.0, 2.0, 3.0, 10.0];
        let m = compute_neighborhood_medians(&topics, &times, &weights, &cfg).unwrap();
        assert_eq!(m[0], 2.5);
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let model = tiny_model(8);
        let ckpt = ModelCheckpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            activation: String::from("relu"),
            train_config: TrainConfig::default(),
            metric_params: crate::corpus::MetricParams::default(),
            cutoff_days: 123.0,
            arch: model.arch.clone(),
            time: model.time,
            topic_model: TopicModel {
                k: 2,
                dim: 3,
                seed: 0,
                centroids: vec![0.0; 6],
                assignments: vec![0, 1],
            },
            params: model.params.clone(),
            rng_state: SeedRng::seed_from_u64(1).state(),
        };
        let json = serde_json::to_string(&ckpt).unwrap();
        let back: ModelCheckpoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }

    #[test]
    fn param_store_rejects_duplicates() {
        let mut store = ParamStore::new();
        store.insert("x", Tensor::scalar(1.0)).unwrap();
        assert!(store.insert("x", Tensor::scalar(2.0)).is_err());
    }
}
