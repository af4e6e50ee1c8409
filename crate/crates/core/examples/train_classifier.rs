//! Trains the one-hidden-layer classifier on a few labeled records and
//! prints the per-epoch loss and held-out accuracy.
//!
//! ```bash
//! cargo run --release -p flick --example train_classifier
//! ```

use flick::classifier::{self, TrainConfig};
use flick::evaluation;
use flick::synth::{self, SynthSpec};

fn main() -> flick::Result<()> {
    let data = synth::generate(&SynthSpec { cluster_std: 2.0, ..SynthSpec::default() })?;
    let classes = data.labeled.labels.class_names().to_vec();
    let (x, y) = data.labeled.all_rows(&classes)?;
    let model = classifier::init_classifier(x.dim(), 64, classes.len(), 3)?;
    let cfg = TrainConfig { learning_rate: 1e-3, epsilon: 1e-8, batch_size: 16, epochs: 30, shuffle_seed: 4, ..TrainConfig::default() };
    let (trained, history) = classifier::train(&model, &x, &y, &cfg)?;
    for (e, l) in history.epoch_losses.iter().enumerate().step_by(5) {
        println!("epoch {:>2} loss {l:.4}", e + 1);
    }
    let (hx, hy) = data.heldout.all_rows(&classes)?;
    let report = evaluation::evaluate(&hy, &classifier::predict(&trained, &hx)?, classes.len())?;
    println!("{} steps, held-out accuracy {:.4}", history.steps, report.accuracy);
    Ok(())
}
