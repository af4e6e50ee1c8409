//! Lloyd's K-means over embedding rows and the pseudo-labels it produces.
//!
//! Distances are squared Euclidean, accumulated in `f64` in a fixed order so
//! that a fit is bit-reproducible for a given seed. Seeding is k-means++ by
//! default, with a uniform-sample option.

use rand::distr::{Distribution, Uniform};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{FlickError, Result};
use crate::ingestion::EmbeddingSet;
use crate::seed;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMethod {
    #[default]
    KMeansPlusPlus,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once the relative inertia improvement of an iteration drops below this.
    pub tol: f64,
    pub seed: u64,
    #[serde(default)]
    pub init: InitMethod,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: 20,
            max_iter: 300,
            tol: 1e-4,
            seed: 0,
            init: InitMethod::KMeansPlusPlus,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub dim: usize,
    /// Row-major `k x dim`.
    pub centroids: Vec<f64>,
    pub inertia: f64,
    pub iterations_run: usize,
    pub seed: u64,
    #[serde(default)]
    pub init: InitMethod,
    /// Inertia after the initial assignment and after every Lloyd iteration.
    #[serde(default)]
    pub inertia_trace: Vec<f64>,
    /// Number of times an empty cluster was re-seeded.
    #[serde(default)]
    pub empty_cluster_repairs: usize,
    /// Assignment of the fitted rows to centroids.
    #[serde(default)]
    pub assignments: Vec<usize>,
}

impl ClusterModel {
    /// A model with fixed centroids and no fit history.
    pub fn from_centroids(centroids: Vec<Vec<f64>>) -> Result<Self> {
        let k = centroids.len();
        let dim = centroids.first().map_or(0, Vec::len);
        if k == 0 || dim == 0 || centroids.iter().any(|c| c.len() != dim) {
            return Err(FlickError::Argument("centroids must be a non-empty rectangular matrix".into()));
        }
        if centroids.iter().flatten().any(|v| !v.is_finite()) {
            return Err(FlickError::Argument("centroids must be finite".into()));
        }
        Ok(ClusterModel {
            k,
            dim,
            centroids: centroids.concat(),
            inertia: 0.0,
            iterations_run: 0,
            seed: 0,
            init: InitMethod::default(),
            inertia_trace: Vec::new(),
            empty_cluster_repairs: 0,
            assignments: Vec::new(),
        })
    }

    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    /// Member count of every cluster under the stored assignments.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Cluster indices paired with the ids of the rows they were computed for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoLabeledSet {
    pub ids: Vec<String>,
    pub pseudo_labels: Vec<usize>,
    pub k: usize,
}

impl PseudoLabeledSet {
    pub fn new(ids: Vec<String>, pseudo_labels: Vec<usize>, k: usize) -> Result<Self> {
        if ids.len() != pseudo_labels.len() {
            return Err(FlickError::Argument(format!(
                "{} ids but {} pseudo-labels",
                ids.len(),
                pseudo_labels.len()
            )));
        }
        if let Some(&bad) = pseudo_labels.iter().find(|&&l| l >= k) {
            return Err(FlickError::Argument(format!("pseudo-label {bad} out of range for k={k}")));
        }
        Ok(PseudoLabeledSet {
            ids,
            pseudo_labels,
            k,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Positions of the records in each cluster, in record order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.pseudo_labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Fails unless `x` holds exactly these ids in this order.
    pub fn check_aligned(&self, x: &EmbeddingSet) -> Result<()> {
        if x.ids() != self.ids.as_slice() {
            return Err(FlickError::Argument(
                "pseudo-labeled ids do not match the embedding set row for row".into(),
            ));
        }
        Ok(())
    }
}

#[inline]
fn sq_dist(x: &[f32], c: &[f64]) -> f64 {
    x.iter()
        .zip(c)
        .map(|(&a, &b)| {
            let d = a as f64 - b;
            d * d
        })
        .sum()
}

/// Index and squared distance of the nearest centroid; lowest index wins ties.
#[inline]
fn nearest(x: &[f32], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

fn kmeans_pp(x: &EmbeddingSet, k: usize, rng: &mut seed::Rng) -> Vec<f64> {
    let n = x.len();
    let dim = x.dim();
    let mut centroids = Vec::with_capacity(k * dim);
    let mut chosen = vec![false; n];

    let first = Uniform::new(0, n).expect("n >= 1").sample(rng);
    chosen[first] = true;
    centroids.extend(x.row(first).iter().map(|&v| v as f64));
    let mut d2: Vec<f64> = x.rows().map(|r| sq_dist(r, &centroids[..dim])).collect();

    let unit = Uniform::new(0.0f64, 1.0).expect("valid range");
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = unit.sample(rng) * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target >= acc; fall back to the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            // every point coincides with a chosen center
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[Uniform::new(0, free.len()).expect("k <= n").sample(rng)]
        };
        chosen[next] = true;
        let start = centroids.len();
        centroids.extend(x.row(next).iter().map(|&v| v as f64));
        let c = &centroids[start..];
        for (i, r) in x.rows().enumerate() {
            let d = sq_dist(r, c);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

fn uniform_init(x: &EmbeddingSet, k: usize, rng: &mut seed::Rng) -> Vec<f64> {
    let mut picks = index::sample(rng, x.len(), k).into_vec();
    picks.sort_unstable();
    picks
        .into_iter()
        .flat_map(|i| x.row(i).iter().map(|&v| v as f64))
        .collect()
}

/// Assigns every row, returning labels, per-row distances and their sum.
fn assign_all(x: &EmbeddingSet, centroids: &[f64]) -> (Vec<usize>, Vec<f64>, f64) {
    let dim = x.dim();
    let mut labels = Vec::with_capacity(x.len());
    let mut dists = Vec::with_capacity(x.len());
    let mut total = 0.0;
    for r in x.rows() {
        let (c, d) = nearest(r, centroids, dim);
        labels.push(c);
        dists.push(d);
        total += d;
    }
    (labels, dists, total)
}

/// Moves each empty cluster's centroid onto the row farthest from its
/// currently assigned centroid. Returns the number of repairs.
fn repair_empty(
    x: &EmbeddingSet,
    labels: &mut [usize],
    dists: &mut [f64],
    centroids: &mut [f64],
    k: usize,
) -> usize {
    let dim = x.dim();
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    let mut repairs = 0;
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        // farthest row whose cluster can spare it; lowest index on ties
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &d) in dists.iter().enumerate() {
            if sizes[labels[i]] > 1 && d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let Some(i) = far else { break };
        sizes[labels[i]] -= 1;
        sizes[c] = 1;
        labels[i] = c;
        dists[i] = 0.0;
        for (dst, &v) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(x.row(i)) {
            *dst = v as f64;
        }
        repairs += 1;
    }
    repairs
}

/// Mean of each cluster's rows; clusters without members keep their centroid.
fn update_centroids(x: &EmbeddingSet, labels: &[usize], centroids: &[f64], k: usize) -> Vec<f64> {
    let dim = x.dim();
    let mut sums = vec![0.0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (r, &l) in x.rows().zip(labels) {
        counts[l] += 1;
        for (s, &v) in sums[l * dim..(l + 1) * dim].iter_mut().zip(r) {
            *s += v as f64;
        }
    }
    for c in 0..k {
        let row = &mut sums[c * dim..(c + 1) * dim];
        if counts[c] == 0 {
            row.copy_from_slice(&centroids[c * dim..(c + 1) * dim]);
        } else {
            let n = counts[c] as f64;
            row.iter_mut().for_each(|s| *s /= n);
        }
    }
    sums
}

fn objective(x: &EmbeddingSet, labels: &[usize], centroids: &[f64]) -> f64 {
    let dim = x.dim();
    x.rows()
        .zip(labels)
        .map(|(r, &l)| sq_dist(r, &centroids[l * dim..(l + 1) * dim]))
        .sum()
}

pub fn kmeans_fit(x: &EmbeddingSet, cfg: &KMeansConfig) -> Result<ClusterModel> {
    let KMeansConfig {
        k,
        max_iter,
        tol,
        seed,
        init,
    } = *cfg;
    if k == 0 {
        return Err(FlickError::Argument("k must be at least 1".into()));
    }
    if k > x.len() {
        return Err(FlickError::Argument(format!("k={k} exceeds the {} rows", x.len())));
    }
    if max_iter == 0 {
        return Err(FlickError::Argument("max_iter must be at least 1".into()));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(FlickError::Argument(format!("tol must be non-negative, got {tol}")));
    }

    let mut rng = seed::rng(seed);
    let mut centroids = match init {
        InitMethod::KMeansPlusPlus => kmeans_pp(x, k, &mut rng),
        InitMethod::Uniform => uniform_init(x, k, &mut rng),
    };

    let (mut labels, mut dists, _) = assign_all(x, &centroids);
    let mut repairs = repair_empty(x, &mut labels, &mut dists, &mut centroids, k);
    let mut inertia: f64 = dists.iter().sum();
    let mut trace = vec![inertia];
    let mut iterations = 0;

    while iterations < max_iter {
        let candidate = update_centroids(x, &labels, &centroids, k);
        // Means minimise the objective for fixed labels up to rounding; if
        // rounding makes the update worse the fit has stalled.
        if objective(x, &labels, &candidate) > inertia {
            break;
        }
        let (mut new_labels, mut new_dists, _) = assign_all(x, &candidate);
        let mut new_centroids = candidate;
        let repaired = repair_empty(x, &mut new_labels, &mut new_dists, &mut new_centroids, k);
        repairs += repaired;
        let new_inertia: f64 = new_dists.iter().sum();
        iterations += 1;

        let improvement = inertia - new_inertia;
        let converged = repaired == 0
            && (new_labels == labels || inertia == 0.0 || improvement <= tol * inertia);
        centroids = new_centroids;
        labels = new_labels;
        inertia = new_inertia;
        trace.push(inertia);
        if converged {
            break;
        }
    }

    // a repair in the last permitted iteration can leave stale labels
    let (final_labels, final_dists, _) = assign_all(x, &centroids);
    if final_labels != labels {
        labels = final_labels;
        inertia = final_dists.iter().sum();
        trace.push(inertia);
    }

    log::debug!("kmeans k={k}: {iterations} iterations, inertia {inertia:.6}, {repairs} repairs");

    Ok(ClusterModel {
        k,
        dim: x.dim(),
        centroids,
        inertia,
        iterations_run: iterations,
        seed,
        init,
        inertia_trace: trace,
        empty_cluster_repairs: repairs,
        assignments: labels,
    })
}

pub fn assign(model: &ClusterModel, x: &EmbeddingSet) -> Result<Vec<usize>> {
    if x.dim() != model.dim {
        return Err(FlickError::Argument(format!(
            "embedding dim {} does not match centroid dim {}",
            x.dim(),
            model.dim
        )));
    }
    Ok(assign_all(x, &model.centroids).0)
}

pub fn pseudo_label(x: &EmbeddingSet, model: &ClusterModel) -> Result<PseudoLabeledSet> {
    let labels = assign(model, x)?;
    PseudoLabeledSet::new(x.ids().to_vec(), labels, model.k)
}

/// Adjusted Rand index between two partitions of the same records.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "partitions must cover the same records");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    for (&i, &j) in a.iter().zip(b) {
        table[i * kb + j] += 1;
    }
    let pairs = |m: u64| (m * m.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().map(|&m| pairs(m)).sum();
    let row_sum: f64 = (0..ka)
        .map(|i| pairs(table[i * kb..(i + 1) * kb].iter().sum()))
        .sum();
    let col_sum: f64 = (0..kb)
        .map(|j| pairs((0..ka).map(|i| table[i * kb + j]).sum()))
        .sum();
    let total = pairs(n as u64);
    let expected = row_sum * col_sum / total;
    let max = 0.5 * (row_sum + col_sum);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
