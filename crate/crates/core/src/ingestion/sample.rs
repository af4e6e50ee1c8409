//! Few-label subsampling of a label table.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::LabelTable;
use crate::error::{FlickError, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FewLabelMode {
    /// `count` ids overall, allocated proportionally to class sizes.
    TotalCount,
    /// `count` ids from every class (or the whole class when smaller).
    PerClassShots,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewLabelSample {
    pub ids: Vec<String>,
    pub mode: FewLabelMode,
    pub count: usize,
}

impl FewLabelSample {
    /// Every labeled id, for callers that want to train on the full table.
    pub fn all(labels: &LabelTable) -> Self {
        FewLabelSample {
            ids: labels.ids().map(str::to_string).collect(),
            mode: FewLabelMode::TotalCount,
            count: labels.len(),
        }
    }
}

/// Per-class allocation for total-count mode: largest-remainder rounding of
/// the proportional shares, then every class raised to at least one id when
/// `count >= classes`. Ties on remainders go to the lower class index.
pub fn proportional_allocation(class_sizes: &[usize], count: usize) -> Vec<usize> {
    let total: usize = class_sizes.iter().sum();
    let mut alloc: Vec<usize> = class_sizes.iter().map(|&s| s * count / total).collect();
    let mut remainders: Vec<(usize, usize)> = class_sizes
        .iter()
        .enumerate()
        .map(|(c, &s)| ((s * count) % total, c))
        .collect();
    // larger remainder first, then lower class index
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = count - alloc.iter().sum::<usize>();
    for &(_, c) in &remainders {
        if left == 0 {
            break;
        }
        if alloc[c] < class_sizes[c] {
            alloc[c] += 1;
            left -= 1;
        }
    }

    let nonempty = class_sizes.iter().filter(|&&s| s > 0).count();
    if count >= nonempty {
        while let Some(c) = (0..alloc.len()).find(|&c| alloc[c] == 0 && class_sizes[c] > 0) {
            // take from the class furthest above its share that can spare one
            let donor = (0..alloc.len())
                .filter(|&d| alloc[d] > 1)
                .max_by(|&a, &b| {
                    let sa = alloc[a] as f64 - (class_sizes[a] * count) as f64 / total as f64;
                    let sb = alloc[b] as f64 - (class_sizes[b] * count) as f64 / total as f64;
                    sa.total_cmp(&sb).then(b.cmp(&a))
                })
                .expect("count >= nonempty classes leaves a class with more than one");
            alloc[donor] -= 1;
            alloc[c] = 1;
        }
    }
    alloc
}

pub fn subsample_few_labels(
    labels: &LabelTable,
    mode: FewLabelMode,
    count: usize,
    seed: u64,
) -> Result<FewLabelSample> {
    if count == 0 {
        return Err(FlickError::Argument("few-label count must be at least 1".into()));
    }
    let z = labels.num_classes();
    let mut members: Vec<Vec<&str>> = vec![Vec::new(); z];
    for (id, c) in labels.iter() {
        members[c].push(id);
    }

    let quota: Vec<usize> = match mode {
        FewLabelMode::TotalCount => {
            if count > labels.len() {
                return Err(FlickError::Argument(format!(
                    "requested {count} labeled ids but only {} are available",
                    labels.len()
                )));
            }
            let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
            proportional_allocation(&sizes, count)
        }
        FewLabelMode::PerClassShots => members.iter().map(|m| m.len().min(count)).collect(),
    };

    let mut rng = seed::rng(seed);
    let mut chosen: HashSet<&str> = HashSet::new();
    for (class_members, &q) in members.iter_mut().zip(&quota) {
        class_members.shuffle(&mut rng);
        chosen.extend(class_members.iter().take(q));
    }

    let ids = labels
        .ids()
        .filter(|id| chosen.contains(id))
        .map(str::to_string)
        .collect();
    Ok(FewLabelSample { ids, mode, count })
}
