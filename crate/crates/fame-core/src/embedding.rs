//! Dense semantic embeddings, cosine similarity, and k-means topic clusters.
//!
//! Clustering is Lloyd's algorithm with k-means++ seeding, fully determined
//! by `(data, k, seed)`. Assignments break distance ties toward the lowest
//! centroid index, and empty clusters are reseeded to the point farthest
//! from its current centroid.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::fmath;
use crate::rng::SeedRng;

/// Norms below this are treated as zero by the guarded cosine.
pub const COSINE_NORM_EPS: f64 = 1e-8;

const KMEANS_MAX_ITER: usize = 100;
const KMEANS_SHIFT_TOL: f64 = 1e-6;

/// Row-major matrix of N embedding vectors of dimension d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(CoreError::data(format!(
                    "embedding row {i} has dimension {} but expected {dim}",
                    row.len()
                )));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(CoreError::data(format!(
                        "embedding row {i} contains a non-finite value"
                    )));
                }
                data.push(v);
            }
        }
        Ok(EmbeddingMatrix { dim, data })
    }

    pub fn n_rows(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Replaces one row; used by leakage tests to perturb held-out papers.
    pub fn set_row(&mut self, i: usize, values: &[f64]) -> Result<()> {
        if values.len() != self.dim {
            return Err(CoreError::argument(format!(
                "set_row: dimension {} != {}",
                values.len(),
                self.dim
            )));
        }
        self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(values);
        Ok(())
    }
}

/// Embedding matrix keyed by paper id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingStore {
    pub ids: Vec<String>,
    pub matrix: EmbeddingMatrix,
    index: BTreeMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(ids: Vec<String>, matrix: EmbeddingMatrix) -> Result<Self> {
        if ids.len() != matrix.n_rows() {
            return Err(CoreError::data(format!(
                "embedding store: {} ids but {} rows",
                ids.len(),
                matrix.n_rows()
            )));
        }
        let mut index = BTreeMap::new();
        for (row, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), row).is_some() {
                return Err(CoreError::data(format!("duplicate embedding id '{id}'")));
            }
        }
        Ok(EmbeddingStore { ids, matrix, index })
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn vector(&self, id: &str) -> Option<&[f64]> {
        self.row_of(id).map(|r| self.matrix.row(r))
    }
}

/// K-means topic model: centroids plus the training assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    pub dim: usize,
    pub seed: u64,
    /// Row-major `k x dim` centroid matrix.
    pub centroids: Vec<f64>,
    /// Cluster id per training row, parallel to the rows that were fit.
    pub assignments: Vec<usize>,
}

impl TopicModel {
    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }
}

/// Guarded cosine similarity: 0 whenever either norm is below
/// [`COSINE_NORM_EPS`].
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(CoreError::argument(format!(
            "cosine: dimension mismatch {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (&a, &b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    let nu = fmath::sqrt(nu);
    let nv = fmath::sqrt(nv);
    if nu < COSINE_NORM_EPS || nv < COSINE_NORM_EPS {
        return Ok(0.0);
    }
    Ok(dot / (nu * nv))
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Nearest centroid by Euclidean distance, ties to the lowest index.
fn nearest_centroid(x: &[f64], centroids: &[f64], k: usize, dim: usize) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for c in 0..k {
        let d = sq_dist(x, &centroids[c * dim..(c + 1) * dim]);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

/// Fits k clusters on the given rows of `matrix` (all rows when `rows` is
/// `None`). Deterministic for a fixed `(data, k, seed)`.
pub fn fit_kmeans(
    matrix: &EmbeddingMatrix,
    rows: Option<&[usize]>,
    k: usize,
    seed: u64,
) -> Result<TopicModel> {
    let all_rows: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all_rows = (0..matrix.n_rows()).collect();
            &all_rows
        }
    };
    let n = rows.len();
    let dim = matrix.dim();
    if k == 0 {
        return Err(CoreError::argument("fit_kmeans: k must be >= 1"));
    }
    if n < k {
        return Err(CoreError::argument(format!(
            "fit_kmeans: {n} points cannot support k = {k}"
        )));
    }

    let mut rng = SeedRng::seed_from_u64(seed);
    let point = |i: usize| matrix.row(rows[i]);

    // k-means++ seeding: first centroid uniform, then D^2-weighted picks.
    let mut centroids = vec![0.0; k * dim];
    let first = rng.index(n);
    centroids[..dim].copy_from_slice(point(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(point(i), &centroids[..dim])).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.uniform() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All mass at existing centroids (duplicate points); any pick works.
            rng.index(n)
        };
        centroids[c * dim..(c + 1) * dim].copy_from_slice(point(pick));
        for i in 0..n {
            let d = sq_dist(point(i), &centroids[c * dim..(c + 1) * dim]);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }

    let mut assignments = vec![0usize; n];
    let mut prev_objective = f64::INFINITY;
    for _iter in 0..KMEANS_MAX_ITER {
        // Assignment step.
        let mut objective = 0.0;
        for i in 0..n {
            let (c, d) = nearest_centroid(point(i), &centroids, k, dim);
            assignments[i] = c;
            objective += d;
        }

        // Reseed empty clusters to the point farthest from its centroid;
        // this only reduces the objective.
        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut far_i = usize::MAX;
            let mut far_d = -1.0;
            for i in 0..n {
                let d = sq_dist(point(i), &centroids[assignments[i] * dim..(assignments[i] + 1) * dim]);
                if d > far_d && counts[assignments[i]] > 1 {
                    far_d = d;
                    far_i = i;
                }
            }
            if far_i == usize::MAX {
                // Every donor cluster is a singleton (duplicate-heavy data);
                // leave the centroid where it is.
                continue;
            }
            objective -= far_d;
            counts[assignments[far_i]] -= 1;
            centroids[c * dim..(c + 1) * dim].copy_from_slice(point(far_i));
            assignments[far_i] = c;
            counts[c] = 1;
        }

        debug_assert!(
            objective <= prev_objective + 1e-9 * (1.0 + prev_objective.abs()),
            "k-means objective increased: {prev_objective} -> {objective}"
        );
        prev_objective = objective;

        // Update step.
        let mut sums = vec![0.0; k * dim];
        for i in 0..n {
            let c = assignments[i];
            for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(point(i)) {
                *s += v;
            }
        }
        let mut max_shift_sq = 0.0f64;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let count = counts[c] as f64;
            let mut shift_sq = 0.0;
            for j in 0..dim {
                let newv = sums[c * dim + j] / count;
                let d = newv - centroids[c * dim + j];
                shift_sq += d * d;
                centroids[c * dim + j] = newv;
            }
            max_shift_sq = max_shift_sq.max(shift_sq);
        }
        if fmath::sqrt(max_shift_sq) < KMEANS_SHIFT_TOL {
            break;
        }
    }

    // Final assignment pass so stored labels match the final centroids.
    for i in 0..n {
        assignments[i] = nearest_centroid(point(i), &centroids, k, dim).0;
    }

    Ok(TopicModel {
        k,
        dim,
        seed,
        centroids,
        assignments,
    })
}

/// Assigns a vector to its nearest centroid (lowest index on ties).
pub fn assign_topic(x: &[f64], model: &TopicModel) -> Result<usize> {
    if x.len() != model.dim {
        return Err(CoreError::argument(format!(
            "assign_topic: dimension {} != {}",
            x.len(),
            model.dim
        )));
    }
    Ok(nearest_centroid(x, &model.centroids, model.k, model.dim).0)
}
