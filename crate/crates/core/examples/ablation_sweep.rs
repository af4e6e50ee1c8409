//! Runs flick, no_refinement and baseline over several seeds on a noisy
//! synthetic fixture and prints macro-F1 per run plus the medians.
//!
//! ```bash
//! cargo run --release -p flick --example ablation_sweep
//! ```

use flick::ingestion::FewLabelMode;
use flick::pipeline::{self, Mode, PipelineConfig, Profile};
use flick::seed::SeedBundle;
use flick::synth::{self, SynthSpec};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() -> flick::Result<()> {
    let modes = [Mode::Flick, Mode::NoRefinement, Mode::Baseline];
    let mut scores: Vec<Vec<f64>> = vec![Vec::new(); modes.len()];

    for seed in 0..5u64 {
        let spec = SynthSpec {
            noise_fraction: 0.3,
            seed,
            ..SynthSpec::default()
        };
        let data = synth::generate(&spec)?;
        let mut cfg = PipelineConfig::with_profile(Profile::Proxy);
        cfg.seeds = SeedBundle::from_master(seed);
        let few = flick::ingestion::subsample_few_labels(
            &data.labeled.labels,
            FewLabelMode::TotalCount,
            100,
            cfg.seeds.subsample,
        )?;
        for (i, &mode) in modes.iter().enumerate() {
            let r = pipeline::run_mode(mode, &cfg, &data.unlabeled, &data.labeled, &few, &data.heldout)?;
            println!("seed {seed} {mode:<14} macro-F1 {:.4}  acc {:.4}", r.evaluation.macro_f1, r.evaluation.accuracy);
            scores[i].push(r.evaluation.macro_f1);
        }
    }
    for (mode, s) in modes.iter().zip(scores) {
        println!("median {mode:<14} {:.4}", median(s));
    }
    Ok(())
}
