//! Runs clustering and refinement on a noisy fixture and shows which
//! clusters the probe keeps, alongside how many swapped points each holds.
//!
//! ```bash
//! cargo run --release -p flick --example refine_top_k
//! ```

use flick::pipeline::{self, PipelineConfig, Profile};
use flick::synth::{self, SynthSpec};

fn main() -> flick::Result<()> {
    let data = synth::generate(&SynthSpec { noise_fraction: 0.3, seed: 1, ..SynthSpec::default() })?;
    let cfg = PipelineConfig::with_profile(Profile::Proxy);
    let stage1 = pipeline::run_stage1(&cfg, &data.unlabeled)?;
    let (refined, audit) = pipeline::run_stage2(&cfg, &data.unlabeled, &stage1.pseudo)?;

    let mut swapped = vec![0usize; stage1.model.k];
    for &i in &data.noised {
        swapped[stage1.pseudo.pseudo_labels[i]] += 1;
    }
    println!("cluster  size  support  accuracy  swapped  kept");
    for row in &audit.report.rows {
        let kept = refined.label_map.contains_key(&row.cluster_id);
        let acc = row.accuracy.map_or("n/a".to_string(), |a| format!("{a:.3}"));
        println!(
            "{:>7} {:>5} {:>8} {:>9} {:>8} {:>5}",
            row.cluster_id, row.size, row.test_support, acc, swapped[row.cluster_id], if kept { "yes" } else { "" }
        );
    }
    println!("kept {} of {} records in {} clusters", refined.len(), data.unlabeled.len(), refined.num_classes());
    Ok(())
}
