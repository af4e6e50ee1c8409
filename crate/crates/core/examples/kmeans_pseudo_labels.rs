//! Clusters unlabeled synthetic points and scores the pseudo-labels against
//! the generator's classes with the adjusted Rand index.
//!
//! ```bash
//! cargo run --release -p flick --example kmeans_pseudo_labels
//! ```

use flick::clustering::{self, KMeansConfig};
use flick::synth::{self, SynthSpec};

fn main() -> flick::Result<()> {
    let data = synth::generate(&SynthSpec { cluster_std: 0.3, ..SynthSpec::default() })?;
    let truth: Vec<usize> = data
        .unlabeled
        .ids()
        .iter()
        .map(|id| data.unlabeled_truth.class_of(id).unwrap())
        .collect();

    for k in [3, 6, 20] {
        let model = clustering::kmeans_fit(&data.unlabeled, &KMeansConfig { k, seed: 7, ..KMeansConfig::default() })?;
        let pseudo = clustering::pseudo_label(&data.unlabeled, &model)?;
        println!(
            "k={k:<3} iterations {:<3} inertia {:>12.3} repairs {} ARI {:.4} sizes {:?}",
            model.iterations_run,
            model.inertia,
            model.empty_cluster_repairs,
            clustering::adjusted_rand_index(&pseudo.pseudo_labels, &truth),
            model.cluster_sizes()
        );
    }
    Ok(())
}
