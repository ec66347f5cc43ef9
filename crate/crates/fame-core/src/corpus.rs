//! Paper corpus: records, composite impact weights, and temporal splits.
//!
//! A corpus is a validated, order-preserving collection of [`PaperRecord`]s.
//! Timestamps are fractional days since 1970-01-01 UTC; every temporal
//! threshold in the pipeline compares in days.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::fmath;

/// Days since the 1970-01-01 UTC epoch.
pub type Days = f64;

pub const CORPUS_SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    CORPUS_SCHEMA_VERSION
}

/// Raw impact signals for one paper, all snapshotted at the label horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ImpactSignals {
    pub github_stars: f64,
    pub citations: f64,
    pub influential_citations: f64,
    pub altmetric: f64,
}

impl ImpactSignals {
    fn validate(&self, id: &str) -> Result<()> {
        for (name, v) in [
            ("github_stars", self.github_stars),
            ("citations", self.citations),
            ("influential_citations", self.influential_citations),
            ("altmetric", self.altmetric),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(CoreError::data(format!(
                    "paper '{id}': signal {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One paper: identity, text, timestamp, bibliography, and impact signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub timestamp_days: Days,
    pub bibliography: Vec<String>,
    pub signals: ImpactSignals,
    /// Row of this paper in the embedding store, once linked.
    #[serde(skip)]
    pub embedding_index: Option<usize>,
}

impl PaperRecord {
    fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(CoreError::data("paper id must be nonempty"));
        }
        if !self.timestamp_days.is_finite() {
            return Err(CoreError::data(format!(
                "paper '{}': timestamp must be finite",
                self.id
            )));
        }
        if self.bibliography.iter().any(|r| r == &self.id) {
            return Err(CoreError::data(format!(
                "paper '{}': bibliography references itself",
                self.id
            )));
        }
        self.signals.validate(&self.id)
    }
}

/// Per-metric log-normalization parameters: `scale * s + 1` fed to a
/// logarithm of the given base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub scale: f64,
    pub base: f64,
}

/// Normalization parameters for the four impact signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub github_stars: MetricPair,
    pub citations: MetricPair,
    pub influential_citations: MetricPair,
    pub altmetric: MetricPair,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            github_stars: MetricPair {
                scale: 1.0,
                base: core::f64::consts::E,
            },
            citations: MetricPair { scale: 1.0, base: 8.0 },
            influential_citations: MetricPair { scale: 10.0, base: 8.0 },
            altmetric: MetricPair { scale: 1.0, base: 4.0 },
        }
    }
}

impl MetricParams {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("github_stars", self.github_stars),
            ("citations", self.citations),
            ("influential_citations", self.influential_citations),
            ("altmetric", self.altmetric),
        ] {
            if !(p.scale > 0.0) || !p.scale.is_finite() {
                return Err(CoreError::argument(format!(
                    "metric {name}: scale must be positive, got {}",
                    p.scale
                )));
            }
            if !(p.base > 1.0) || !p.base.is_finite() {
                return Err(CoreError::argument(format!(
                    "metric {name}: base must be > 1, got {}",
                    p.base
                )));
            }
        }
        Ok(())
    }
}

/// Validated, order-preserving corpus with a unique-id index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    records: Vec<PaperRecord>,
    index: BTreeMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus, validating every record and rejecting duplicate ids.
    pub fn from_records(records: Vec<PaperRecord>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (pos, rec) in records.iter().enumerate() {
            rec.validate()?;
            if index.insert(rec.id.clone(), pos).is_some() {
                return Err(CoreError::data(format!("duplicate paper id '{}'", rec.id)));
            }
        }
        Ok(Corpus { records, index })
    }

    /// Parses one JSON object per line. Blank lines are ignored; a malformed
    /// line fails with its 1-based line number.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: PaperRecord = serde_json::from_str(line).map_err(|e| CoreError::Parse {
                line: lineno + 1,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        Corpus::from_records(records)
    }

    /// Serializes back to one JSON object per line, in corpus order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            // PaperRecord contains no map types, so serialization cannot fail.
            out.push_str(&serde_json::to_string(rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[PaperRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&PaperRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Attaches embedding rows by id. Every corpus paper must be present in
    /// `ids`; extra embedding rows are allowed and ignored.
    pub fn link_embeddings(&mut self, ids: &[String]) -> Result<()> {
        let mut by_id = BTreeMap::new();
        for (row, id) in ids.iter().enumerate() {
            by_id.insert(id.as_str(), row);
        }
        for rec in &mut self.records {
            match by_id.get(rec.id.as_str()) {
                Some(&row) => rec.embedding_index = Some(row),
                None => {
                    return Err(CoreError::data(format!(
                        "paper '{}' has no embedding row",
                        rec.id
                    )))
                }
            }
        }
        Ok(())
    }

    /// Restricted corpus containing only the given ids, preserving order.
    pub fn subset(&self, ids: &[String]) -> Result<Corpus> {
        let mut records = Vec::with_capacity(ids.len());
        for id in ids {
            match self.get(id) {
                Some(rec) => records.push(rec.clone()),
                None => return Err(CoreError::data(format!("unknown paper id '{id}'"))),
            }
        }
        Corpus::from_records(records)
    }
}

/// Temporal partition of a corpus at a cutoff, plus the label horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub cutoff_days: Days,
    /// Horizon at which impact labels were collected (the latest timestamp
    /// seen in the corpus).
    pub end_days: Days,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Composite impact weight: sum of the four log-normalized signals.
///
/// Zero signals give exactly zero, and the weight is strictly increasing in
/// every signal.
pub fn compute_impact_weight(signals: &ImpactSignals, params: &MetricParams) -> f64 {
    let term = |s: f64, p: &MetricPair| fmath::ln(p.scale * s + 1.0) / fmath::ln(p.base);
    term(signals.github_stars, &params.github_stars)
        + term(signals.citations, &params.citations)
        + term(signals.influential_citations, &params.influential_citations)
        + term(signals.altmetric, &params.altmetric)
}

/// Min-max rescale to [0, 1]. A degenerate range (max == min) maps to all
/// zeros rather than NaN so downstream margins stay well-defined.
pub fn normalize_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(CoreError::argument("normalize_weights: empty input"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &w in weights {
        lo = lo.min(w);
        hi = hi.max(w);
    }
    if hi == lo {
        return Ok(alloc::vec![0.0; weights.len()]);
    }
    let span = hi - lo;
    Ok(weights.iter().map(|&w| (w - lo) / span).collect())
}

/// Splits a corpus at `cutoff`: papers with timestamp <= cutoff train, the
/// rest test. Order within each side follows corpus order.
pub fn temporal_split(corpus: &Corpus, cutoff: Days) -> CorpusSplit {
    let mut train_ids = Vec::new();
    let mut test_ids = Vec::new();
    let mut end_days = f64::NEG_INFINITY;
    for rec in corpus.records() {
        end_days = end_days.max(rec.timestamp_days);
        if rec.timestamp_days <= cutoff {
            train_ids.push(rec.id.clone());
        } else {
            test_ids.push(rec.id.clone());
        }
    }
    if !end_days.is_finite() {
        end_days = cutoff;
    }
    CorpusSplit {
        cutoff_days: cutoff,
        end_days,
        train_ids,
        test_ids,
    }
}
