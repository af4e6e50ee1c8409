//! Embedding matrices, label tables and few-label subsamples.
//!
//! Embeddings live in FLKE files (little-endian binary, see [`flke`]);
//! labels live in JSONL files with one `{"id": .., "label": ..}` object per
//! line (see [`labels`]).

pub mod flke;
pub mod labels;
pub mod sample;

use std::collections::HashMap;

use crate::error::{FlickError, Result};

pub use flke::{load_embeddings, write_embeddings};
pub use labels::{load_labels, parse_labels, write_labels, LabelTable};
pub use sample::{subsample_few_labels, FewLabelMode, FewLabelSample};

/// Dense `n x dim` matrix of `f32` embeddings with one id per row.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    vectors: Vec<f32>,
    dim: usize,
    index: HashMap<String, usize>,
}

impl EmbeddingSet {
    /// Builds a set from row-major `vectors`, validating every invariant.
    pub fn new(ids: Vec<String>, vectors: Vec<f32>, dim: usize) -> Result<Self> {
        if ids.is_empty() {
            return Err(FlickError::Data("embedding set is empty".into()));
        }
        if dim == 0 {
            return Err(FlickError::Data("embedding dimension must be positive".into()));
        }
        if vectors.len() != ids.len() * dim {
            return Err(FlickError::Data(format!(
                "expected {} values for {} rows of dim {}, got {}",
                ids.len() * dim,
                ids.len(),
                dim,
                vectors.len()
            )));
        }
        if let Some(pos) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(FlickError::Data(format!(
                "non-finite value in row {} (id {:?})",
                pos / dim,
                ids[pos / dim]
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(FlickError::Data(format!("duplicate id {id:?}")));
            }
        }
        Ok(EmbeddingSet {
            ids,
            vectors,
            dim,
            index,
        })
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows(ids: Vec<String>, rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.len() != ids.len() {
            return Err(FlickError::Data(format!(
                "{} ids but {} rows",
                ids.len(),
                rows.len()
            )));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(FlickError::Data(format!(
                "row {bad} has dim {}, expected {dim}",
                rows[bad].len()
            )));
        }
        Self::new(ids, rows.concat(), dim)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Row-major values.
    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.vectors.chunks_exact(self.dim)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// New set holding the given ids in the given order.
    pub fn select(&self, ids: &[String]) -> Result<EmbeddingSet> {
        let mut vectors = Vec::with_capacity(ids.len() * self.dim);
        for id in ids {
            let pos = self
                .position(id)
                .ok_or_else(|| FlickError::Data(format!("id {id:?} not in embedding set")))?;
            vectors.extend_from_slice(self.row(pos));
        }
        EmbeddingSet::new(ids.to_vec(), vectors, self.dim)
    }

    /// New set holding the rows at `positions`.
    pub fn subset(&self, positions: &[usize]) -> Result<EmbeddingSet> {
        let mut ids = Vec::with_capacity(positions.len());
        let mut vectors = Vec::with_capacity(positions.len() * self.dim);
        for &p in positions {
            ids.push(self.ids[p].clone());
            vectors.extend_from_slice(self.row(p));
        }
        EmbeddingSet::new(ids, vectors, self.dim)
    }
}

/// Rows and class indices of the records a label table shares with an
/// embedding set, in label-table order restricted to `ids`.
pub fn join_labeled(
    set: &EmbeddingSet,
    labels: &LabelTable,
    ids: &[String],
) -> Result<(EmbeddingSet, Vec<usize>)> {
    let mut targets = Vec::with_capacity(ids.len());
    for id in ids {
        let class = labels
            .class_of(id)
            .ok_or_else(|| FlickError::Data(format!("id {id:?} has no label")))?;
        targets.push(class);
    }
    Ok((set.select(ids)?, targets))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("r{i}")).collect()
    }

    #[test]
    fn rejects_empty_and_nonfinite() {
        assert!(matches!(
            EmbeddingSet::new(vec![], vec![], 2),
            Err(FlickError::Data(_))
        ));
        assert!(matches!(
            EmbeddingSet::new(ids(1), vec![f32::NAN, 0.0], 2),
            Err(FlickError::Data(_))
        ));
        assert!(matches!(
            EmbeddingSet::new(ids(1), vec![f32::INFINITY], 1),
            Err(FlickError::Data(_))
        ));
    }

    #[test]
    fn rejects_duplicate_ids_and_ragged_rows() {
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(EmbeddingSet::new(dup, vec![0.0, 1.0], 1).is_err());
        assert!(EmbeddingSet::from_rows(ids(2), &[vec![0.0, 1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn select_preserves_requested_order() {
        let set = EmbeddingSet::from_rows(ids(3), &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]])
            .unwrap();
        let sub = set.select(&["r2".into(), "r0".into()]).unwrap();
        assert_eq!(sub.ids(), ["r2", "r0"]);
        assert_eq!(sub.row(0), [1.0, 1.0]);
        assert_eq!(sub.row(1), [1.0, 0.0]);
        assert!(set.select(&["zz".into()]).is_err());
    }
}
