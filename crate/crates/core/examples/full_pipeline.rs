//! Generates a fixture, runs the full pipeline, and writes the report
//! directory (config, cluster model and report, PL-FT and final models,
//! metrics).
//!
//! ```bash
//! cargo run --release -p flick --example full_pipeline -- /tmp/flick-report
//! ```

use flick::pipeline::{self, Mode, PipelineConfig, Profile};
use flick::report;
use flick::synth::{self, SynthSpec};

fn main() -> flick::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("flick-report").display().to_string());
    let data = synth::generate(&SynthSpec { noise_fraction: 0.3, seed: 2, ..SynthSpec::default() })?;
    let cfg = PipelineConfig::with_profile(Profile::Proxy);
    let few = pipeline::draw_few(&cfg, &data.labeled)?;
    let result = pipeline::run_mode(Mode::Flick, &cfg, &data.unlabeled, &data.labeled, &few, &data.heldout)?;
    let files = report::write_run_report(&out, &cfg, &result)?;
    print!("{}", result.evaluation.render_table());
    println!("wrote {} to {out}", files.join(", "));
    Ok(())
}
