//! Pre-trains on cluster pseudo-labels, copies the hidden layer into a
//! classifier with a fresh output layer, and compares fine-tuning from that
//! start against fine-tuning from scratch on the same few labels.
//!
//! ```bash
//! cargo run --release -p flick --example weight_transfer
//! ```

use flick::classifier::{self, TrainConfig};
use flick::clustering::{self, KMeansConfig};
use flick::evaluation;
use flick::ingestion::{self, FewLabelMode};
use flick::synth::{self, SynthSpec};

fn main() -> flick::Result<()> {
    let data = synth::generate(&SynthSpec { cluster_std: 2.0, seed: 5, ..SynthSpec::default() })?;
    let cfg = TrainConfig { learning_rate: 1e-3, epsilon: 1e-8, batch_size: 32, epochs: 3, shuffle_seed: 1, ..TrainConfig::default() };

    let km = clustering::kmeans_fit(&data.unlabeled, &KMeansConfig { k: 6, seed: 2, ..KMeansConfig::default() })?;
    let pre = classifier::init_classifier(data.unlabeled.dim(), 64, km.k, 10)?;
    let (pre, _) = classifier::train(&pre, &data.unlabeled, &km.assignments, &cfg)?;

    let classes = data.labeled.labels.class_names().to_vec();
    let few = ingestion::subsample_few_labels(&data.labeled.labels, FewLabelMode::PerClassShots, 4, 9)?;
    let (x, y) = data.labeled.rows_for(&few.ids, &classes)?;
    let (hx, hy) = data.heldout.all_rows(&classes)?;

    let transferred = classifier::transfer_init(&pre, classes.len(), 11)?;
    assert_eq!(transferred.hidden_layer(), pre.hidden_layer());
    let scratch = classifier::init_classifier(x.dim(), 64, classes.len(), 11)?;
    let fine = TrainConfig { epochs: 20, batch_size: 4, ..cfg };
    for (name, start) in [("transfer", transferred), ("scratch", scratch)] {
        let (m, _) = classifier::train(&start, &x, &y, &fine)?;
        let r = evaluation::evaluate(&hy, &classifier::predict(&m, &hx)?, classes.len())?;
        println!("{name:<9} macro-F1 {:.4}", r.macro_f1);
    }
    Ok(())
}
