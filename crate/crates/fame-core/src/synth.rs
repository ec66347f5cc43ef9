//! Synthetic corpora with planted structure: topic centroids that drift
//! along fixed directions, paper embeddings scattered around them, impact
//! weights that grow with the alignment between a paper's residual and its
//! topic's drift, and bibliographies over earlier same-topic papers with a
//! planted subset of true inspirations.
//!
//! Everything is a pure function of the config, so the full pipeline can be
//! validated at desk scale: recovering the planted alignment signal is
//! exactly the forecasting task.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    compute_impact_weight, Corpus, ImpactSignals, MetricParams, PaperRecord,
    CORPUS_SCHEMA_VERSION,
};
use crate::embedding::{cosine_similarity, EmbeddingMatrix, EmbeddingStore};
use crate::error::{CoreError, Result};
use crate::fmath;
use crate::graph::InspirationEdge;
use crate::rng::SeedRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_papers: usize,
    pub n_topics: usize,
    pub embed_dim: usize,
    /// Papers are published uniformly over `[0, span_days)`.
    pub span_days: f64,
    /// Norm of each topic's static base point.
    pub base_scale: f64,
    /// Distance a topic centroid travels over the full span.
    pub drift_rate: f64,
    /// Isotropic residual noise scale (sigma).
    pub noise_scale: f64,
    /// Impact gain on the residual/drift alignment (lambda).
    pub alignment_gain: f64,
    /// Additive noise on the impact target.
    pub impact_noise: f64,
    /// Baseline impact target before the alignment term.
    pub impact_base: f64,
    /// Citations drawn per paper from earlier same-topic papers.
    pub citations_per_paper: usize,
    /// Fraction of citations planted as true inspirations (p_true).
    pub inspiration_fraction: f64,
    /// How much of the inspiring paper's residual a true inspiration
    /// inherits (0 = none, 1 = copy).
    pub inherited_residual: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_papers: 800,
            n_topics: 3,
            embed_dim: 16,
            span_days: 720.0,
            base_scale: 4.0,
            drift_rate: 2.0,
            noise_scale: 0.3,
            alignment_gain: 2.0,
            impact_noise: 0.2,
            impact_base: 2.5,
            citations_per_paper: 4,
            inspiration_fraction: 0.8,
            inherited_residual: 0.6,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_topics == 0 || self.n_papers < self.n_topics {
            return Err(CoreError::argument(
                "synth: need n_papers >= n_topics >= 1",
            ));
        }
        if self.embed_dim == 0 {
            return Err(CoreError::argument("synth: embed_dim must be positive"));
        }
        if !(self.span_days > 0.0) {
            return Err(CoreError::argument("synth: span_days must be positive"));
        }
        if self.noise_scale < 0.0 {
            return Err(CoreError::argument("synth: noise_scale must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.inspiration_fraction) {
            return Err(CoreError::argument(
                "synth: inspiration_fraction must be in [0, 1]",
            ));
        }
        if !(0.0..=1.0).contains(&self.inherited_residual) {
            return Err(CoreError::argument(
                "synth: inherited_residual must be in [0, 1]",
            ));
        }
        Ok(())
    }
}

/// Ground truth the generator planted, for validation and tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub bases: Vec<Vec<f64>>,
    pub drifts: Vec<Vec<f64>>,
    /// Per paper (corpus order): topic, residual/drift alignment, and the
    /// exact impact weight reconstructible from the emitted signals.
    pub topic_of: Vec<usize>,
    pub alignment: Vec<f64>,
    pub weights: Vec<f64>,
    pub true_edges: Vec<InspirationEdge>,
    /// Mock-verifier threshold at which about `inspiration_fraction` of
    /// the true edges are accepted.
    pub suggested_mock_threshold: f64,
}

/// A generated world: corpus, embeddings, and the planted truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub corpus: Corpus,
    pub embeddings: EmbeddingStore,
    pub truth: PlantedTruth,
}

fn random_unit(rng: &mut SeedRng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let norm = fmath::sqrt(v.iter().map(|x| x * x).sum());
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = SeedRng::seed_from_u64(cfg.seed);
    let d = cfg.embed_dim;
    let metric_params = MetricParams::default();

    let bases: Vec<Vec<f64>> = (0..cfg.n_topics)
        .map(|_| {
            random_unit(&mut rng, d)
                .into_iter()
                .map(|x| x * cfg.base_scale)
                .collect()
        })
        .collect();
    let drifts: Vec<Vec<f64>> = (0..cfg.n_topics)
        .map(|_| {
            random_unit(&mut rng, d)
                .into_iter()
                .map(|x| x * cfg.drift_rate)
                .collect()
        })
        .collect();

    // Publication times ascending so ids sort temporally and bibliographies
    // can look strictly backward.
    let mut times: Vec<f64> = (0..cfg.n_papers)
        .map(|_| rng.uniform_in(0.0, cfg.span_days))
        .collect();
    times.sort_by(f64::total_cmp);

    let mut records = Vec::with_capacity(cfg.n_papers);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_papers);
    let mut residuals: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_papers);
    let mut topic_of: Vec<usize> = Vec::with_capacity(cfg.n_papers);
    let mut alignment = Vec::with_capacity(cfg.n_papers);
    let mut weights = Vec::with_capacity(cfg.n_papers);
    let mut true_edges = Vec::new();
    let mut true_pair_sims = Vec::new();

    for i in 0..cfg.n_papers {
        let topic = i % cfg.n_topics;
        let t = times[i];
        let t_prime = t / cfg.span_days;

        // Earlier same-topic pool for the bibliography (strictly earlier
        // timestamps; sorted order makes that a prefix scan).
        let pool: Vec<usize> = (0..i)
            .filter(|&j| topic_of[j] == topic && times[j] < t)
            .collect();
        let n_cite = cfg.citations_per_paper.min(pool.len());
        let mut cited: Vec<usize> = rng
            .sample_distinct(pool.len(), n_cite)
            .into_iter()
            .map(|p| pool[p])
            .collect();
        cited.sort_unstable();

        // A planted fraction of citations are true inspirations; the first
        // one donates part of its residual direction.
        let mut inspired_by: Option<usize> = None;
        let mut flags = Vec::with_capacity(cited.len());
        for &j in &cited {
            let is_true = rng.uniform() < cfg.inspiration_fraction;
            flags.push(is_true);
            if is_true && inspired_by.is_none() {
                inspired_by = Some(j);
            }
        }

        let fresh: Vec<f64> = (0..d).map(|_| rng.normal() * cfg.noise_scale).collect();
        let delta: Vec<f64> = match inspired_by {
            Some(parent) if cfg.inherited_residual > 0.0 => {
                let rho = cfg.inherited_residual;
                let mix = fmath::sqrt(1.0 - rho * rho);
                residuals[parent]
                    .iter()
                    .zip(&fresh)
                    .map(|(p, f)| rho * p + mix * f)
                    .collect()
            }
            _ => fresh,
        };

        let x: Vec<f64> = bases[topic]
            .iter()
            .zip(&drifts[topic])
            .zip(&delta)
            .map(|((b, dr), dl)| b + dr * t_prime + dl)
            .collect();

        let align = cosine_similarity(&delta, &drifts[topic])?;
        let target =
            (cfg.impact_base + cfg.alignment_gain * align + cfg.impact_noise * rng.normal())
                .max(0.0);
        // Invert the citations channel of the weight formula so the emitted
        // signals reproduce the planted weight through the real path.
        let citations = (fmath::exp(target * fmath::ln(8.0)) - 1.0).max(0.0);
        let signals = ImpactSignals {
            citations,
            ..ImpactSignals::default()
        };
        let weight = compute_impact_weight(&signals, &metric_params);

        let id = format!("p{i:05}");
        for (&j, &is_true) in cited.iter().zip(&flags) {
            if is_true {
                true_edges.push(InspirationEdge {
                    from_id: format!("p{j:05}"),
                    to_id: id.clone(),
                    confidence: 1.0,
                });
            }
        }

        records.push(PaperRecord {
            schema_version: CORPUS_SCHEMA_VERSION,
            id: id.clone(),
            title: format!("Synthetic study {i:05} in field {topic}"),
            abstract_text: format!(
                "Placeholder abstract for synthetic paper {i:05}, topic {topic}, \
                 published on day {t:.2}."
            ),
            timestamp_days: t,
            bibliography: cited.iter().map(|&j| format!("p{j:05}")).collect(),
            signals,
            embedding_index: None,
        });
        vectors.push(x);
        residuals.push(delta);
        topic_of.push(topic);
        alignment.push(align);
        weights.push(weight);
    }

    // Tune the mock threshold so roughly `inspiration_fraction` of true
    // pairs sit at or above it.
    for e in &true_edges {
        let from_idx: usize = e.from_id[1..].parse().expect("synth id");
        let to_idx: usize = e.to_id[1..].parse().expect("synth id");
        true_pair_sims.push(cosine_similarity(&vectors[from_idx], &vectors[to_idx])?);
    }
    let suggested_mock_threshold = if true_pair_sims.is_empty() {
        0.8
    } else {
        true_pair_sims.sort_by(f64::total_cmp);
        let cut = ((1.0 - cfg.inspiration_fraction) * true_pair_sims.len() as f64) as usize;
        true_pair_sims[cut.min(true_pair_sims.len() - 1)]
    };

    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let mut corpus = Corpus::from_records(records)?;
    let embeddings = EmbeddingStore::new(ids.clone(), EmbeddingMatrix::from_rows(vectors)?)?;
    corpus.link_embeddings(&ids)?;

    Ok(SynthOutput {
        corpus,
        embeddings,
        truth: PlantedTruth {
            bases,
            drifts,
            topic_of,
            alignment,
            weights,
            true_edges,
            suggested_mock_threshold,
        },
    })
}
