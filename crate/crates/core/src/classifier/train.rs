//! Backpropagation and mini-batch Adam.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ClassifierModel, LOG_CLAMP};
use crate::error::{FlickError, Result};
use crate::ingestion::EmbeddingSet;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Added to the root of the second-moment estimate.
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-5,
            epsilon: 1e-6,
            batch_size: 64,
            epochs: 10,
            beta1: 0.9,
            beta2: 0.999,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(FlickError::Argument(format!("invalid train config: {what}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean training loss of every epoch, measured before each batch's update.
    pub epoch_losses: Vec<f64>,
    pub final_loss: f64,
    /// Adam steps taken.
    pub steps: u64,
}

/// Gradients of the mean cross-entropy, shaped like the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    fn zeros(model: &ClassifierModel) -> Self {
        Gradients {
            w1: vec![0.0; model.w1.len()],
            b1: vec![0.0; model.b1.len()],
            w2: vec![0.0; model.w2.len()],
            b2: vec![0.0; model.b2.len()],
        }
    }

    fn clear(&mut self) {
        for g in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

struct Workspace {
    hidden: Vec<f64>,
    probs: Vec<f64>,
    dhidden: Vec<f64>,
}

impl Workspace {
    fn new(model: &ClassifierModel) -> Self {
        Workspace {
            hidden: vec![0.0; model.h],
            probs: vec![0.0; model.c],
            dhidden: vec![0.0; model.h],
        }
    }
}

/// Adds the gradient of `-ln p[target] * scale` for one row to `grads` and
/// returns the row's clamped loss.
fn accumulate_row(
    model: &ClassifierModel,
    x: &[f32],
    target: usize,
    scale: f64,
    ws: &mut Workspace,
    grads: &mut Gradients,
) -> f64 {
    let (h, c) = (model.h, model.c);
    model.hidden_into(x, &mut ws.hidden);
    model.output_into(&ws.hidden, &mut ws.probs);
    let loss = -ws.probs[target].max(LOG_CLAMP).ln();

    // dz2 = (p - onehot) * scale, stored in probs
    ws.probs[target] -= 1.0;
    ws.probs.iter_mut().for_each(|v| *v *= scale);
    let dz2 = &ws.probs;

    for (g, &d) in grads.b2.iter_mut().zip(dz2) {
        *g += d;
    }
    for j in 0..h {
        let a = ws.hidden[j];
        let w_row = &model.w2[j * c..(j + 1) * c];
        let g_row = &mut grads.w2[j * c..(j + 1) * c];
        let mut back = 0.0;
        for k in 0..c {
            g_row[k] += a * dz2[k];
            back += w_row[k] * dz2[k];
        }
        // relu mask: a > 0 iff the pre-activation was positive
        ws.dhidden[j] = if a > 0.0 { back } else { 0.0 };
    }

    for (g, &d) in grads.b1.iter_mut().zip(&ws.dhidden) {
        *g += d;
    }
    for (&xi, g_row) in x.iter().zip(grads.w1.chunks_exact_mut(h)) {
        let xi = xi as f64;
        if xi == 0.0 {
            continue;
        }
        for (g, &d) in g_row.iter_mut().zip(&ws.dhidden) {
            *g += xi * d;
        }
    }
    loss
}

/// Loss and analytic gradients of the mean cross-entropy over a row-major
/// batch of `m x d` inputs.
pub fn gradients(model: &ClassifierModel, batch: &[f32], targets: &[usize]) -> Result<(f64, Gradients)> {
    let m = model.check_input(batch.len())?;
    if m != targets.len() || m == 0 {
        return Err(FlickError::Argument(format!(
            "{m} rows but {} targets",
            targets.len()
        )));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= model.c) {
        return Err(FlickError::Argument(format!("target {t} out of range for {} classes", model.c)));
    }
    let mut grads = Gradients::zeros(model);
    let mut ws = Workspace::new(model);
    let scale = 1.0 / m as f64;
    let mut loss = 0.0;
    for (x, &t) in batch.chunks_exact(model.d).zip(targets) {
        loss += accumulate_row(model, x, t, scale, &mut ws, &mut grads);
    }
    Ok((loss * scale, grads))
}

struct Adam {
    m: Gradients,
    v: Gradients,
    t: u64,
}

impl Adam {
    fn new(model: &ClassifierModel) -> Self {
        Adam {
            m: Gradients::zeros(model),
            v: Gradients::zeros(model),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut ClassifierModel, grads: &Gradients, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        let groups = [
            (&mut model.w1, &grads.w1, &mut self.m.w1, &mut self.v.w1),
            (&mut model.b1, &grads.b1, &mut self.m.b1, &mut self.v.b1),
            (&mut model.w2, &grads.w2, &mut self.m.w2, &mut self.v.w2),
            (&mut model.b2, &grads.b2, &mut self.m.b2, &mut self.v.b2),
        ];
        for (param, grad, m, v) in groups {
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                param[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
    }
}

/// Mini-batch Adam on the mean cross-entropy. Rows are reshuffled every
/// epoch from `cfg.shuffle_seed`; optimizer moments start at zero.
pub fn train(
    model: &ClassifierModel,
    x: &EmbeddingSet,
    y: &[usize],
    cfg: &TrainConfig,
) -> Result<(ClassifierModel, TrainHistory)> {
    cfg.validate()?;
    if x.dim() != model.d {
        return Err(FlickError::Argument(format!(
            "embedding dim {} does not match model input dim {}",
            x.dim(),
            model.d
        )));
    }
    if x.len() != y.len() {
        return Err(FlickError::Argument(format!("{} rows but {} targets", x.len(), y.len())));
    }
    if y.is_empty() {
        return Err(FlickError::Argument("no training data".into()));
    }
    if let Some(&t) = y.iter().find(|&&t| t >= model.c) {
        return Err(FlickError::Argument(format!("target {t} out of range for {} classes", model.c)));
    }

    let mut model = model.clone();
    let mut adam = Adam::new(&model);
    let mut grads = Gradients::zeros(&model);
    let mut ws = Workspace::new(&model);
    let mut rng = seed::rng(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.clear();
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                batch_loss += accumulate_row(&model, x.row(i), y[i], scale, &mut ws, &mut grads);
            }
            if !batch_loss.is_finite() {
                return Err(FlickError::Numeric {
                    epoch,
                    detail: format!("non-finite loss after {} steps", adam.t),
                });
            }
            epoch_loss += batch_loss;
            adam.step(&mut model, &grads, cfg);
        }
        if !model.is_finite() {
            return Err(FlickError::Numeric {
                epoch,
                detail: "parameters diverged to non-finite values".into(),
            });
        }
        let mean = epoch_loss / x.len() as f64;
        log::debug!("epoch {epoch}/{}: loss {mean:.6}", cfg.epochs);
        epoch_losses.push(mean);
    }

    let final_loss = *epoch_losses.last().expect("epochs >= 1");
    Ok((
        model,
        TrainHistory {
            epoch_losses,
            final_loss,
            steps: adam.t,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{init_classifier, predict};

    fn separable(n: usize) -> (EmbeddingSet, Vec<usize>) {
        let mut rng = seed::rng(4);
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        use rand::Rng;
        for i in 0..n {
            let class = i % 2;
            let offset = if class == 0 { -1.0 } else { 1.0 };
            rows.push(vec![
                offset + rng.random_range(-0.5..0.5f32),
                rng.random_range(-1.0..1.0f32),
            ]);
            ids.push(format!("s{i}"));
            y.push(class);
        }
        (EmbeddingSet::from_rows(ids, &rows).unwrap(), y)
    }

    #[test]
    fn fits_separable_data() {
        let (x, y) = separable(80);
        let m = init_classifier(2, 8, 2, 1).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            epsilon: 1e-8,
            batch_size: 16,
            epochs: 50,
            ..Default::default()
        };
        let (trained, hist) = train(&m, &x, &y, &cfg).unwrap();
        assert_eq!(hist.epoch_losses.len(), 50);
        assert!(hist.final_loss < hist.epoch_losses[0]);
        assert_eq!(predict(&trained, &x).unwrap(), y);
    }

    #[test]
    fn single_epoch_full_batch_is_one_step() {
        let (x, y) = separable(10);
        let m = init_classifier(2, 4, 2, 1).unwrap();
        let cfg = TrainConfig { epochs: 1, batch_size: 64, ..Default::default() };
        let (_, hist) = train(&m, &x, &y, &cfg).unwrap();
        assert_eq!(hist.steps, 1);
    }

    #[test]
    fn first_adam_step_moves_each_weight_by_lr() {
        // with bias correction the first step is lr * g / (|g| + eps)
        let (x, y) = separable(6);
        let m = init_classifier(2, 4, 2, 1).unwrap();
        let cfg = TrainConfig { learning_rate: 0.01, epsilon: 1e-12, epochs: 1, ..Default::default() };
        let (_, g) = gradients(&m, x.vectors(), &y).unwrap();
        let (t, _) = train(&m, &x, &y, &cfg).unwrap();
        for i in 0..m.b2.len() {
            let expected = m.b2[i] - 0.01 * g.b2[i].signum();
            assert!((t.b2[i] - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, y) = separable(50);
        let m = init_classifier(2, 6, 2, 2).unwrap();
        let cfg = TrainConfig { batch_size: 8, epochs: 3, learning_rate: 1e-3, shuffle_seed: 5, ..Default::default() };
        let a = train(&m, &x, &y, &cfg).unwrap();
        let b = train(&m, &x, &y, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (x, y) = separable(4);
        let m = init_classifier(2, 4, 2, 1).unwrap();
        let cfg = TrainConfig::default();
        assert!(train(&m, &x, &y[..3], &cfg).is_err());
        assert!(train(&m, &x, &[0, 1, 2, 0], &cfg).is_err());
        let bad = TrainConfig { learning_rate: 0.0, ..Default::default() };
        assert!(matches!(train(&m, &x, &y, &bad), Err(FlickError::Argument(_))));
        let bad = TrainConfig { beta2: 1.0, ..Default::default() };
        assert!(train(&m, &x, &y, &bad).is_err());
    }

    #[test]
    fn nan_loss_reports_epoch() {
        let (x, y) = separable(4);
        let mut m = init_classifier(2, 4, 2, 1).unwrap();
        m.b2[0] = f64::NAN;
        let err = train(&m, &x, &y, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, FlickError::Numeric { epoch: 1, .. }));
    }
}
