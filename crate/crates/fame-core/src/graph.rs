//! Verified inspiration graph: retrieve-and-verify edge construction plus
//! the ablation graph variants.
//!
//! Candidates for a target paper must pass three filters — bibliography
//! membership, cosine similarity above `tau_sim`, and publication gap above
//! `delta_days_min` — then the `top_k` most similar are sent to a
//! [`Verifier`]. Only verdicts with `is_inspired` and confidence at or above
//! `confidence_min` become edges. Verifier failures skip the pair and are
//! reported as warnings; they never abort a build.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Days, PaperRecord};
use crate::embedding::{cosine_similarity, EmbeddingStore};
use crate::error::{CoreError, Result};
use crate::rng::SeedRng;

/// Number of earlier papers drawn per target by the random-graph ablation.
pub const RANDOM_INSPIRATIONS_PER_PAPER: usize = 8;

/// Thresholds for candidate retrieval and verdict retention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    /// Minimum cosine similarity (strict) between candidate and target.
    pub tau_sim: f64,
    /// Minimum publication gap in days (strict).
    pub delta_days_min: Days,
    /// Candidates kept per target, by descending similarity.
    pub top_k: usize,
    /// Verdict confidence needed to retain an edge (inclusive).
    pub confidence_min: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            tau_sim: 0.6,
            delta_days_min: 60.0,
            top_k: 12,
            confidence_min: 0.6,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(CoreError::argument("graph: top_k must be >= 1"));
        }
        if !self.tau_sim.is_finite() || self.tau_sim > 1.0 {
            return Err(CoreError::argument("graph: tau_sim must be finite and <= 1"));
        }
        Ok(())
    }
}

/// A retrieval hit: earlier paper cited by, similar to, and sufficiently
/// older than the later paper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub earlier_id: String,
    pub later_id: String,
    pub similarity: f64,
    pub time_delta_days: Days,
}

/// Verifier output for one candidate pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub is_inspired: bool,
    pub confidence: f64,
    pub rationale: String,
}

/// Directed knowledge-flow edge (earlier -> later).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspirationEdge {
    pub from_id: String,
    pub to_id: String,
    pub confidence: f64,
}

/// Everything a verifier needs to judge one pair.
#[derive(Debug, Clone)]
pub struct VerificationRequest<'a> {
    pub earlier: &'a PaperRecord,
    pub later: &'a PaperRecord,
    pub similarity: f64,
    pub time_delta_days: Days,
}

impl VerificationRequest<'_> {
    /// Plain-text judging prompt carrying both papers and the retrieval
    /// signals; remote verifiers post this verbatim.
    pub fn prompt(&self) -> String {
        format!(
            "You judge whether a later paper is inspired by an earlier paper.\n\
             Return strict JSON:\n\
             {{\n  \"is_inspired\": true,\n  \"confidence\": 0.0,\n  \"rationale\": \"1-2 sentence explanation\"\n}}\n\
             \n\
             Later paper A:\n\
             - arXiv ID: {}\n\
             - Title: {}\n\
             - Abstract: {}\n\
             \n\
             Earlier paper B:\n\
             - arXiv ID: {}\n\
             - Title: {}\n\
             - Abstract: {}\n\
             \n\
             Additional signal:\n\
             - cosine_similarity: {}\n\
             - time_delta_days(A_minus_B): {}\n",
            self.later.id,
            self.later.title,
            self.later.abstract_text,
            self.earlier.id,
            self.earlier.title,
            self.earlier.abstract_text,
            self.similarity,
            self.time_delta_days,
        )
    }
}

/// Judges whether a later paper was fundamentally inspired by an earlier one.
pub trait Verifier {
    fn verify(&self, request: &VerificationRequest<'_>) -> Result<Verdict>;
}

/// Deterministic offline verifier: accepts iff the pair's similarity
/// reaches the threshold; confidence is the similarity itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MockVerifier {
    pub accept_threshold: f64,
}

impl Default for MockVerifier {
    fn default() -> Self {
        MockVerifier {
            accept_threshold: 0.8,
        }
    }
}

impl Verifier for MockVerifier {
    fn verify(&self, request: &VerificationRequest<'_>) -> Result<Verdict> {
        let accepted = request.similarity >= self.accept_threshold;
        Ok(Verdict {
            is_inspired: accepted,
            confidence: request.similarity.clamp(0.0, 1.0),
            rationale: if accepted {
                String::from("similarity at or above the mock threshold")
            } else {
                String::from("similarity below the mock threshold")
            },
        })
    }
}

/// Result of a graph build: the edge set plus skip warnings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphBuild {
    pub edges: Vec<InspirationEdge>,
    pub warnings: Vec<String>,
}

/// Retrieves the candidate precursor pool for one target paper.
///
/// All returned pairs satisfy the three filters; at most `top_k` are kept,
/// ordered by descending similarity with ties broken by earlier timestamp
/// then id.
pub fn retrieve_candidates(
    target: &PaperRecord,
    corpus: &Corpus,
    embeddings: &EmbeddingStore,
    config: &GraphConfig,
) -> Result<Vec<CandidatePair>> {
    config.validate()?;
    let target_vec = embeddings
        .vector(&target.id)
        .ok_or_else(|| CoreError::data(format!("paper '{}' has no embedding", target.id)))?;

    let mut seen = BTreeSet::new();
    let mut pairs = Vec::new();
    for cited_id in &target.bibliography {
        if !seen.insert(cited_id.as_str()) {
            continue;
        }
        let Some(cited) = corpus.get(cited_id) else {
            continue;
        };
        let delta = target.timestamp_days - cited.timestamp_days;
        if !(delta > config.delta_days_min) {
            continue;
        }
        let Some(cited_vec) = embeddings.vector(cited_id) else {
            continue;
        };
        let sim = cosine_similarity(target_vec, cited_vec)?;
        if !(sim > config.tau_sim) {
            continue;
        }
        pairs.push(CandidatePair {
            earlier_id: cited.id.clone(),
            later_id: target.id.clone(),
            similarity: sim,
            time_delta_days: delta,
        });
    }

    pairs.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| {
                let ta = target.timestamp_days - a.time_delta_days;
                let tb = target.timestamp_days - b.time_delta_days;
                ta.total_cmp(&tb)
            })
            .then_with(|| a.earlier_id.cmp(&b.earlier_id))
    });
    pairs.truncate(config.top_k);
    Ok(pairs)
}

/// Asks the verifier about one pair. The verdict comes back unmodified.
pub fn verify_pair(
    pair: &CandidatePair,
    corpus: &Corpus,
    verifier: &dyn Verifier,
) -> Result<Verdict> {
    let earlier = corpus
        .get(&pair.earlier_id)
        .ok_or_else(|| CoreError::data(format!("unknown paper '{}'", pair.earlier_id)))?;
    let later = corpus
        .get(&pair.later_id)
        .ok_or_else(|| CoreError::data(format!("unknown paper '{}'", pair.later_id)))?;
    verifier.verify(&VerificationRequest {
        earlier,
        later,
        similarity: pair.similarity,
        time_delta_days: pair.time_delta_days,
    })
}

fn collect_edges(map: BTreeMap<(String, String), f64>) -> Vec<InspirationEdge> {
    map.into_iter()
        .map(|((from_id, to_id), confidence)| InspirationEdge {
            from_id,
            to_id,
            confidence,
        })
        .collect()
}

/// Builds the verified inspiration graph over a (train) corpus.
///
/// An edge is retained iff the verdict is positive and its confidence is at
/// least `confidence_min`. Verifier failures skip the pair with a warning.
pub fn build_graph(
    corpus: &Corpus,
    embeddings: &EmbeddingStore,
    config: &GraphConfig,
    verifier: &dyn Verifier,
) -> Result<GraphBuild> {
    let mut edges = BTreeMap::new();
    let mut warnings = Vec::new();
    for target in corpus.records() {
        for pair in retrieve_candidates(target, corpus, embeddings, config)? {
            match verify_pair(&pair, corpus, verifier) {
                Ok(verdict) => {
                    if verdict.is_inspired && verdict.confidence >= config.confidence_min {
                        edges.insert(
                            (pair.earlier_id.clone(), pair.later_id.clone()),
                            verdict.confidence,
                        );
                    }
                }
                Err(err) => warnings.push(format!(
                    "skipping pair {} -> {}: {err}",
                    pair.earlier_id, pair.later_id
                )),
            }
        }
    }
    Ok(GraphBuild {
        edges: collect_edges(edges),
        warnings,
    })
}

/// Ablation variant: the raw citation graph. One edge per resolvable,
/// strictly-forward bibliography entry, confidence 1.
pub fn full_citation_graph(corpus: &Corpus) -> Vec<InspirationEdge> {
    let mut edges = BTreeMap::new();
    for target in corpus.records() {
        for cited_id in &target.bibliography {
            let Some(cited) = corpus.get(cited_id) else {
                continue;
            };
            if cited.timestamp_days < target.timestamp_days {
                edges.insert((cited.id.clone(), target.id.clone()), 1.0);
            }
        }
    }
    collect_edges(edges)
}

/// Ablation variant: for each paper, up to
/// [`RANDOM_INSPIRATIONS_PER_PAPER`] strictly-earlier papers drawn uniformly
/// without replacement.
pub fn random_inspiration_graph(corpus: &Corpus, seed: u64) -> Vec<InspirationEdge> {
    let mut rng = SeedRng::seed_from_u64(seed);
    let mut edges = BTreeMap::new();
    for target in corpus.records() {
        let earlier: Vec<&PaperRecord> = corpus
            .records()
            .iter()
            .filter(|r| r.timestamp_days < target.timestamp_days)
            .collect();
        if earlier.is_empty() {
            continue;
        }
        let k = RANDOM_INSPIRATIONS_PER_PAPER.min(earlier.len());
        for idx in rng.sample_distinct(earlier.len(), k) {
            edges.insert((earlier[idx].id.clone(), target.id.clone()), 1.0);
        }
    }
    collect_edges(edges)
}

/// Panics if any edge points backward in time or is missing an endpoint;
/// the graph is a DAG when every edge moves strictly forward.
pub fn assert_forward_in_time(edges: &[InspirationEdge], corpus: &Corpus) {
    for e in edges {
        let from = corpus.get(&e.from_id).expect("edge endpoint in corpus");
        let to = corpus.get(&e.to_id).expect("edge endpoint in corpus");
        assert!(
            from.timestamp_days < to.timestamp_days,
            "edge {} -> {} does not move forward in time",
            e.from_id,
            e.to_id
        );
    }
}
