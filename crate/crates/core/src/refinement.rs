//! Pseudo-label refinement.
//!
//! A probe classifier is trained on a stratified fraction of every cluster
//! and asked to recover the cluster ids of the remaining records. Clusters
//! the probe recovers best are kept; the rest of the pseudo-labels are
//! dropped before intermediate training.
//!
//! Ranking order: accuracy descending, then test support descending, then
//! cluster id ascending. Clusters with no test members have no accuracy and
//! are never selected.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classifier::{self, ClassifierModel, TrainConfig};
use crate::clustering::PseudoLabeledSet;
use crate::error::{FlickError, Result};
use crate::ingestion::EmbeddingSet;
use crate::seed;

/// Record positions (indices into the pseudo-labeled set) of each half.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPair {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub train_frac: f64,
}

impl SplitPair {
    pub fn train_ids<'a>(&'a self, p: &'a PseudoLabeledSet) -> impl Iterator<Item = &'a str> {
        self.train.iter().map(move |&i| p.ids[i].as_str())
    }

    pub fn test_ids<'a>(&'a self, p: &'a PseudoLabeledSet) -> impl Iterator<Item = &'a str> {
        self.test.iter().map(move |&i| p.ids[i].as_str())
    }
}

/// Train-side count for one cluster: `round(frac * size)`, kept within
/// `[1, size - 1]` so both halves see the cluster. A singleton goes to test.
pub fn train_quota(size: usize, frac: f64) -> usize {
    if size < 2 {
        return 0;
    }
    ((frac * size as f64).round() as usize).clamp(1, size - 1)
}

pub fn stratified_split(p: &PseudoLabeledSet, train_frac: f64, seed: u64) -> Result<SplitPair> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(FlickError::Argument(format!(
            "train fraction must lie in (0, 1), got {train_frac}"
        )));
    }
    if p.is_empty() {
        return Err(FlickError::Argument("cannot split an empty pseudo-labeled set".into()));
    }
    let mut rng = seed::rng(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut members in p.members() {
        members.shuffle(&mut rng);
        let q = train_quota(members.len(), train_frac);
        train.extend_from_slice(&members[..q]);
        test.extend_from_slice(&members[q..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPair {
        train,
        test,
        train_frac,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub cluster_id: usize,
    pub size: usize,
    pub test_support: usize,
    pub correct: usize,
    /// `None` when the cluster has no test members.
    pub accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub rows: Vec<ClusterRow>,
    pub probe_overall_accuracy: f64,
}

impl ClusterReport {
    /// Builds a report from per-cluster `(test_support, correct)` tallies.
    pub fn from_tallies(tallies: &[(usize, usize)], sizes: &[usize]) -> Self {
        let rows: Vec<ClusterRow> = tallies
            .iter()
            .enumerate()
            .map(|(id, &(support, correct))| ClusterRow {
                cluster_id: id,
                size: sizes.get(id).copied().unwrap_or(support),
                test_support: support,
                correct,
                accuracy: (support > 0).then(|| correct as f64 / support as f64),
            })
            .collect();
        let support: usize = rows.iter().map(|r| r.test_support).sum();
        let correct: usize = rows.iter().map(|r| r.correct).sum();
        ClusterReport {
            rows,
            probe_overall_accuracy: if support > 0 {
                correct as f64 / support as f64
            } else {
                0.0
            },
        }
    }

    pub fn rankable(&self) -> impl Iterator<Item = &ClusterRow> {
        self.rows.iter().filter(|r| r.accuracy.is_some())
    }
}

/// Trains a fresh probe to predict cluster ids from the train half, then
/// tallies its hits on the test half per cluster.
pub fn probe_and_report(
    p: &PseudoLabeledSet,
    split: &SplitPair,
    x: &EmbeddingSet,
    hidden_size: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ClassifierModel, ClusterReport)> {
    p.check_aligned(x)?;
    if split.train.is_empty() {
        return Err(FlickError::Argument("probe train split is empty".into()));
    }
    let train_x = x.subset(&split.train)?;
    let train_y: Vec<usize> = split.train.iter().map(|&i| p.pseudo_labels[i]).collect();
    // a single cluster still gets a two-way head; the spare class is never a target
    let model = classifier::init_classifier(x.dim(), hidden_size, p.k.max(2), seed)?;
    let (model, history) = classifier::train(&model, &train_x, &train_y, cfg)?;
    log::info!(
        "probe trained on {} records over {} clusters, final loss {:.4}",
        split.train.len(),
        p.k,
        history.final_loss
    );

    let mut tallies = vec![(0usize, 0usize); p.k];
    if !split.test.is_empty() {
        let test_x = x.subset(&split.test)?;
        let predicted = classifier::predict(&model, &test_x)?;
        for (&i, &guess) in split.test.iter().zip(&predicted) {
            let cluster = p.pseudo_labels[i];
            tallies[cluster].0 += 1;
            if guess == cluster {
                tallies[cluster].1 += 1;
            }
        }
    }
    let sizes: Vec<usize> = p.members().iter().map(Vec::len).collect();
    Ok((model, ClusterReport::from_tallies(&tallies, &sizes)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    /// Selected cluster ids in rank order.
    pub clusters: Vec<usize>,
    pub requested: usize,
    pub rankable: usize,
    /// Set when fewer than `requested` clusters could be ranked.
    pub clamped: bool,
}

fn rank_order(a: &ClusterRow, b: &ClusterRow) -> Ordering {
    let (aa, ba) = (a.accuracy.unwrap_or(f64::NAN), b.accuracy.unwrap_or(f64::NAN));
    ba.total_cmp(&aa)
        .then(b.test_support.cmp(&a.test_support))
        .then(a.cluster_id.cmp(&b.cluster_id))
}

pub fn select_top_k(report: &ClusterReport, k_top: usize) -> Result<Selection> {
    if k_top == 0 {
        return Err(FlickError::Argument("k_top must be at least 1".into()));
    }
    let mut ranked: Vec<&ClusterRow> = report.rankable().collect();
    if ranked.is_empty() {
        return Err(FlickError::Selection("no cluster has test members to rank".into()));
    }
    ranked.sort_by(|a, b| rank_order(a, b));
    let rankable = ranked.len();
    let take = k_top.min(rankable);
    if take < k_top {
        log::warn!("requested top-{k_top} clusters but only {rankable} are rankable");
    }
    Ok(Selection {
        clusters: ranked[..take].iter().map(|r| r.cluster_id).collect(),
        requested: k_top,
        rankable,
        clamped: take < k_top,
    })
}

/// Every record of the selected clusters, relabeled by rank.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedSet {
    pub selected_clusters: Vec<usize>,
    /// Original cluster id to contiguous label.
    pub label_map: BTreeMap<usize, usize>,
    /// Positions in the pseudo-labeled set.
    pub positions: Vec<usize>,
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
}

impl RefinedSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.selected_clusters.len()
    }
}

pub fn build_refined(p: &PseudoLabeledSet, selection: &[usize]) -> Result<RefinedSet> {
    if selection.is_empty() {
        return Err(FlickError::Selection("empty cluster selection".into()));
    }
    let mut label_map = BTreeMap::new();
    for (rank, &c) in selection.iter().enumerate() {
        if c >= p.k {
            return Err(FlickError::Argument(format!("cluster {c} out of range for k={}", p.k)));
        }
        if label_map.insert(c, rank).is_some() {
            return Err(FlickError::Argument(format!("cluster {c} selected twice")));
        }
    }
    let mut positions = Vec::new();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (i, (id, l)) in p.ids.iter().zip(&p.pseudo_labels).enumerate() {
        if let Some(&new) = label_map.get(l) {
            positions.push(i);
            ids.push(id.clone());
            labels.push(new);
        }
    }
    Ok(RefinedSet {
        selected_clusters: selection.to_vec(),
        label_map,
        positions,
        ids,
        labels,
    })
}

/// Everything the refinement stage decided, as written to `cluster_report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementAudit {
    pub train_frac: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub report: ClusterReport,
    pub selection: Selection,
    pub refined_size: usize,
    pub warnings: Vec<String>,
}

impl RefinementAudit {
    pub fn new(split: &SplitPair, report: ClusterReport, selection: Selection, refined: &RefinedSet) -> Self {
        let mut warnings = Vec::new();
        if selection.clamped {
            warnings.push(format!(
                "requested {} clusters, only {} rankable",
                selection.requested, selection.rankable
            ));
        }
        let unrankable: Vec<String> = report
            .rows
            .iter()
            .filter(|r| r.accuracy.is_none())
            .map(|r| r.cluster_id.to_string())
            .collect();
        if !unrankable.is_empty() {
            warnings.push(format!("clusters without test support: {}", unrankable.join(", ")));
        }
        RefinementAudit {
            train_frac: split.train_frac,
            train_size: split.train.len(),
            test_size: split.test.len(),
            report,
            selection,
            refined_size: refined.len(),
            warnings,
        }
    }
}
