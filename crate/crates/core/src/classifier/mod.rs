//! One-hidden-layer classification head over frozen embeddings:
//! `softmax(relu(x W1 + b1) W2 + b2)`.
//!
//! Parameters are `f64` and stored row-major (`W1` is `d x h`, `W2` is
//! `h x c`). Inputs are the `f32` embedding rows, widened on the fly.

mod train;

use rand::distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{FlickError, Result};
use crate::ingestion::EmbeddingSet;
use crate::seed;

pub use train::{gradients, train, Gradients, TrainConfig, TrainHistory};

/// Probabilities are clamped to this before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

/// Dense row-major `f64` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub d: usize,
    pub h: usize,
    pub c: usize,
    #[serde(rename = "W1")]
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    #[serde(rename = "W2")]
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub profile_name: Option<String>,
}

/// The transferable part of a model: its hidden layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenLayer {
    #[serde(rename = "W1")]
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
}

fn glorot(fan_in: usize, fan_out: usize, len: usize, rng: &mut seed::Rng) -> Vec<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    (0..len).map(|_| dist.sample(rng)).collect()
}

pub fn init_classifier(d: usize, h: usize, c: usize, seed: u64) -> Result<ClassifierModel> {
    if d == 0 || h == 0 {
        return Err(FlickError::Argument(format!(
            "input and hidden sizes must be positive (d={d}, h={h})"
        )));
    }
    if c < 2 {
        return Err(FlickError::Argument(format!("need at least 2 classes, got {c}")));
    }
    let mut rng = seed::rng(seed);
    let w1 = glorot(d, h, d * h, &mut rng);
    let w2 = glorot(h, c, h * c, &mut rng);
    Ok(ClassifierModel {
        d,
        h,
        c,
        w1,
        b1: vec![0.0; h],
        w2,
        b2: vec![0.0; c],
        seed,
        profile_name: None,
    })
}

/// Copies the hidden layer of `source` and draws a fresh output layer for
/// `new_class_count` classes.
pub fn transfer_init(
    source: &ClassifierModel,
    new_class_count: usize,
    seed: u64,
) -> Result<ClassifierModel> {
    if new_class_count < 2 {
        return Err(FlickError::Argument(format!(
            "need at least 2 target classes, got {new_class_count}"
        )));
    }
    let h = source.h;
    let mut rng = seed::rng(seed);
    Ok(ClassifierModel {
        d: source.d,
        h,
        c: new_class_count,
        w1: source.w1.clone(),
        b1: source.b1.clone(),
        w2: glorot(h, new_class_count, h * new_class_count, &mut rng),
        b2: vec![0.0; new_class_count],
        seed,
        profile_name: source.profile_name.clone(),
    })
}

impl ClassifierModel {
    pub fn hidden_layer(&self) -> HiddenLayer {
        HiddenLayer {
            w1: self.w1.clone(),
            b1: self.b1.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .all(|p| p.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn check_input(&self, len: usize) -> Result<usize> {
        if !len.is_multiple_of(self.d) {
            return Err(FlickError::Argument(format!(
                "batch of {len} values is not a multiple of the input dim {}",
                self.d
            )));
        }
        Ok(len / self.d)
    }

    /// Hidden activations `relu(x W1 + b1)` for one row.
    pub(crate) fn hidden_into(&self, x: &[f32], out: &mut [f64]) {
        out.copy_from_slice(&self.b1);
        for (&xi, w_row) in x.iter().zip(self.w1.chunks_exact(self.h)) {
            let xi = xi as f64;
            for (o, &w) in out.iter_mut().zip(w_row) {
                *o += xi * w;
            }
        }
        for o in out.iter_mut() {
            if *o < 0.0 {
                *o = 0.0;
            }
        }
    }

    /// Softmax output for one row given its hidden activations.
    pub(crate) fn output_into(&self, hidden: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.b2);
        for (&a, w_row) in hidden.iter().zip(self.w2.chunks_exact(self.c)) {
            if a == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(w_row) {
                *o += a * w;
            }
        }
        softmax_in_place(out);
    }
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Class probabilities for a row-major batch of `m x d` values.
pub fn forward(model: &ClassifierModel, batch: &[f32]) -> Result<Matrix> {
    let m = model.check_input(batch.len())?;
    let mut probs = Matrix::zeros(m, model.c);
    let mut hidden = vec![0.0; model.h];
    for (x, out) in batch
        .chunks_exact(model.d)
        .zip(probs.data.chunks_exact_mut(model.c))
    {
        model.hidden_into(x, &mut hidden);
        model.output_into(&hidden, out);
    }
    Ok(probs)
}

pub fn forward_set(model: &ClassifierModel, x: &EmbeddingSet) -> Result<Matrix> {
    if x.dim() != model.d {
        return Err(FlickError::Argument(format!(
            "embedding dim {} does not match model input dim {}",
            x.dim(),
            model.d
        )));
    }
    forward(model, x.vectors())
}

/// Mean negative log-likelihood of `targets` under `probs`.
pub fn cross_entropy(probs: &Matrix, targets: &[usize]) -> Result<f64> {
    if probs.rows != targets.len() {
        return Err(FlickError::Argument(format!(
            "{} probability rows but {} targets",
            probs.rows,
            targets.len()
        )));
    }
    if probs.rows == 0 {
        return Err(FlickError::Argument("empty batch".into()));
    }
    let mut total = 0.0;
    for (row, &t) in probs.iter_rows().zip(targets) {
        if t >= probs.cols {
            return Err(FlickError::Argument(format!(
                "target {t} out of range for {} classes",
                probs.cols
            )));
        }
        total -= row[t].max(LOG_CLAMP).ln();
    }
    Ok(total / probs.rows as f64)
}

/// Row-wise argmax; the lowest index wins ties.
pub fn argmax_rows(probs: &Matrix) -> Vec<usize> {
    probs
        .iter_rows()
        .map(|row| {
            let mut best = 0;
            for (j, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn predict(model: &ClassifierModel, x: &EmbeddingSet) -> Result<Vec<usize>> {
    Ok(argmax_rows(&forward_set(model, x)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_model(d: usize, h: usize, c: usize) -> ClassifierModel {
        let mut m = init_classifier(d, h, c, 0).unwrap();
        m.w1.iter_mut().for_each(|v| *v = 0.0);
        m.w2.iter_mut().for_each(|v| *v = 0.0);
        m
    }

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let a = init_classifier(4, 2, 2, 17).unwrap();
        let b = init_classifier(4, 2, 2, 17).unwrap();
        assert_eq!(a, b);
        assert!(a.b1.iter().chain(&a.b2).all(|&v| v == 0.0));
        assert_ne!(a, init_classifier(4, 2, 2, 18).unwrap());
    }

    #[test]
    fn init_respects_glorot_bound() {
        let m = init_classifier(384, 256, 3, 5).unwrap();
        let bound = (6.0f64 / 640.0).sqrt();
        assert!(m.w1.iter().all(|v| v.abs() <= bound));
        let bound2 = (6.0f64 / 259.0).sqrt();
        assert!(m.w2.iter().all(|v| v.abs() <= bound2));
    }

    #[test]
    fn init_rejects_bad_dims() {
        assert!(init_classifier(0, 2, 2, 0).is_err());
        assert!(init_classifier(2, 0, 2, 0).is_err());
        assert!(init_classifier(2, 2, 1, 0).is_err());
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = zero_model(3, 4, 5);
        let p = forward(&m, &[0.0; 6]).unwrap();
        for row in p.iter_rows() {
            assert!(row.iter().all(|&v| (v - 0.2).abs() < 1e-15));
        }
        assert_eq!(predict(&m, &EmbeddingSet::new(vec!["a".into()], vec![1.0, 2.0, 3.0], 3).unwrap()).unwrap(), vec![0]);
    }

    #[test]
    fn hand_built_two_two_two() {
        let m = ClassifierModel {
            d: 2,
            h: 2,
            c: 2,
            w1: vec![1.0, -1.0, 0.5, 2.0],
            b1: vec![0.1, -0.2],
            w2: vec![1.5, -0.5, -1.0, 0.25],
            b2: vec![0.0, 0.3],
            seed: 0,
            profile_name: None,
        };
        let x = [0.5f32, -1.0];
        // z1 = [0.5*1 + -1*0.5 + 0.1, 0.5*-1 + -1*2 - 0.2] = [0.1, -2.7]; relu -> [0.1, 0]
        // z2 = [0.1*1.5, 0.1*-0.5 + 0.3] = [0.15, 0.25]
        let e0 = 0.15f64.exp();
        let e1 = 0.25f64.exp();
        let expected = [e0 / (e0 + e1), e1 / (e0 + e1)];
        let p = forward(&m, &x).unwrap();
        assert!((p.data[0] - expected[0]).abs() < 1e-6);
        assert!((p.data[1] - expected[1]).abs() < 1e-6);
    }

    #[test]
    fn forward_rejects_ragged_batch() {
        let m = init_classifier(3, 2, 2, 0).unwrap();
        assert!(matches!(forward(&m, &[0.0; 4]), Err(FlickError::Argument(_))));
    }

    #[test]
    fn cross_entropy_cases() {
        let one_hot = Matrix::from_rows(&[vec![0.0, 1.0, 0.0]]);
        let l = cross_entropy(&one_hot, &[1]).unwrap();
        assert!(l.abs() <= 2.8e-11);

        let uniform = Matrix::from_rows(&vec![vec![0.25; 4]; 3]);
        let l = cross_entropy(&uniform, &[0, 3, 2]).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-9);

        // clamp: zero probability on the target gives -ln(1e-12)
        let wrong = Matrix::from_rows(&[vec![1.0, 0.0]]);
        assert!((cross_entropy(&wrong, &[1]).unwrap() - 12.0 * 10f64.ln()).abs() < 1e-9);

        assert!(matches!(cross_entropy(&uniform, &[0, 4, 1]), Err(FlickError::Argument(_))));
    }

    #[test]
    fn argmax_picks_largest_then_lowest() {
        let p = Matrix::from_rows(&[vec![0.1, 0.7, 0.2], vec![0.4, 0.2, 0.4]]);
        assert_eq!(argmax_rows(&p), vec![1, 0]);
    }

    #[test]
    fn transfer_copies_hidden_and_redraws_head() {
        let src = init_classifier(6, 256, 15, 1).unwrap();
        let t = transfer_init(&src, 3, 2).unwrap();
        assert_eq!((t.d, t.h, t.c), (6, 256, 3));
        assert_eq!(t.w2.len(), 256 * 3);
        assert_eq!(t.hidden_layer(), src.hidden_layer());

        let same = transfer_init(&src, 15, 1).unwrap();
        assert_eq!(same.hidden_layer(), src.hidden_layer());
        assert_ne!(same.w2, src.w2);
        assert!(transfer_init(&src, 1, 0).is_err());
    }

    #[test]
    fn transferred_with_zero_head_is_uniform() {
        let mut src = init_classifier(4, 8, 5, 3).unwrap();
        src.b2 = vec![3.0, -1.0, 0.5, 2.0, 1.0];
        let mut t = transfer_init(&src, 4, 9).unwrap();
        t.w2.iter_mut().for_each(|v| *v = 0.0);
        t.b2.iter_mut().for_each(|v| *v = 0.0);
        let p = forward(&t, &[0.3, -2.0, 1.0, 4.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(p.data.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn json_field_names() {
        let m = init_classifier(2, 2, 2, 0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        for key in ["d", "h", "c", "W1", "b1", "W2", "b2", "seed", "profile_name"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: ClassifierModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }
}
