//! Confusion matrix and one-vs-rest metrics.
//!
//! Per-class metrics whose denominator is zero are reported as `None`
//! (JSON `null`) and count as 0 in the macro averages.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{FlickError, Result};

/// `Z x Z` counts, rows are true classes and columns predictions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let classes = counts.len();
        if classes == 0 || counts.iter().any(|r| r.len() != classes) {
            return Err(FlickError::Argument("confusion matrix must be square and non-empty".into()));
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion_matrix(truth: &[usize], predicted: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(FlickError::Argument(format!(
            "{} true labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(FlickError::Argument("nothing to evaluate".into()));
    }
    let mut counts = vec![vec![0u64; classes]; classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= classes || p >= classes {
            return Err(FlickError::Argument(format!(
                "label pair ({t}, {p}) out of range for {classes} classes"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub macro_precision: f64,
    pub macro_sensitivity: f64,
    pub macro_specificity: f64,
    pub per_class: Vec<ClassMetrics>,
    #[serde(default)]
    pub class_names: Vec<String>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn macro_mean(values: impl Iterator<Item = Option<f64>>, z: usize) -> f64 {
    values.map(|v| v.unwrap_or(0.0)).sum::<f64>() / z as f64
}

pub fn compute_metrics(confusion: &ConfusionMatrix) -> Result<EvaluationReport> {
    let z = confusion.classes;
    let total = confusion.total();
    if total == 0 {
        return Err(FlickError::Argument("confusion matrix has no counts".into()));
    }
    let row_sums: Vec<u64> = confusion.counts.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<u64> = (0..z).map(|j| confusion.counts.iter().map(|r| r[j]).sum()).collect();

    let per_class: Vec<ClassMetrics> = (0..z)
        .map(|c| {
            let tp = confusion.counts[c][c];
            let fp = col_sums[c] - tp;
            let fn_ = row_sums[c] - tp;
            let tn = total - tp - fp - fn_;
            let precision = ratio(tp, tp + fp);
            let sensitivity = ratio(tp, tp + fn_);
            let f1 = match (precision, sensitivity) {
                (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
                _ => None,
            };
            ClassMetrics {
                precision,
                sensitivity,
                specificity: ratio(tn, tn + fp),
                f1,
                support: row_sums[c],
            }
        })
        .collect();

    Ok(EvaluationReport {
        accuracy: confusion.trace() as f64 / total as f64,
        macro_f1: macro_mean(per_class.iter().map(|m| m.f1), z),
        macro_precision: macro_mean(per_class.iter().map(|m| m.precision), z),
        macro_sensitivity: macro_mean(per_class.iter().map(|m| m.sensitivity), z),
        macro_specificity: macro_mean(per_class.iter().map(|m| m.specificity), z),
        per_class,
        confusion: confusion.clone(),
        class_names: Vec::new(),
    })
}

pub fn evaluate(truth: &[usize], predicted: &[usize], classes: usize) -> Result<EvaluationReport> {
    compute_metrics(&confusion_matrix(truth, predicted, classes)?)
}

impl EvaluationReport {
    pub fn with_class_names(mut self, names: &[String]) -> Self {
        self.class_names = names.to_vec();
        self
    }

    /// Fixed-width table: one row per class plus the macro row.
    pub fn render_table(&self) -> String {
        let pct = |v: Option<f64>| match v {
            Some(v) => format!("{:>10.2}%", v * 100.0),
            None => format!("{:>11}", "n/a"),
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16}{:>11}{:>11}{:>11}{:>11}{:>9}",
            "class", "precision", "sensitiv.", "specific.", "f1", "support"
        );
        for (c, m) in self.per_class.iter().enumerate() {
            let name = self.class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
            let _ = writeln!(
                out,
                "{:<16}{}{}{}{}{:>9}",
                truncate(&name, 15),
                pct(m.precision),
                pct(m.sensitivity),
                pct(m.specificity),
                pct(m.f1),
                m.support
            );
        }
        let _ = writeln!(
            out,
            "{:<16}{}{}{}{}{:>9}",
            "macro",
            pct(Some(self.macro_precision)),
            pct(Some(self.macro_sensitivity)),
            pct(Some(self.macro_specificity)),
            pct(Some(self.macro_f1)),
            self.confusion.total()
        );
        let _ = writeln!(out, "accuracy {:.2}%", self.accuracy * 100.0);
        out
    }
}

fn truncate(s: &str, max: usize) -> String {
    s.chars().take(max).collect()
}
