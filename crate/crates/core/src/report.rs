//! JSON report directories.
//!
//! Every file except `run.json` is a pure function of the inputs and
//! config. `run.json` carries the only wall-clock field,
//! [`TIMESTAMP_FIELD`], which determinism checks must ignore.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::classifier::TrainHistory;
use crate::error::{FlickError, Result};
use crate::evaluation::EvaluationReport;
use crate::pipeline::{Mode, PipelineConfig, PipelineResult};

pub const TIMESTAMP_FIELD: &str = "generated_at_unix";

pub const CONFIG_FILE: &str = "config.json";
pub const CLUSTER_MODEL_FILE: &str = "cluster_model.json";
pub const CLUSTER_REPORT_FILE: &str = "cluster_report.json";
pub const PLFT_MODEL_FILE: &str = "plft_model.json";
pub const CLSFT_INIT_FILE: &str = "clsft_init.json";
pub const FINAL_MODEL_FILE: &str = "final_model.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const RUN_FILE: &str = "run.json";

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| FlickError::Data(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| FlickError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| FlickError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| FlickError::Format(format!("{}: {e}", path.display())))
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Serialize)]
struct Metrics<'a> {
    mode: Mode,
    evaluation: &'a EvaluationReport,
    final_history: &'a TrainHistory,
    #[serde(skip_serializing_if = "Option::is_none")]
    plft_history: Option<&'a TrainHistory>,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    mode: Mode,
    profile: &'a str,
    files: Vec<&'static str>,
    accuracy: f64,
    macro_f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    selected_clusters: Option<&'a [usize]>,
    generated_at_unix: u64,
}

/// Writes the report directory for a pipeline run and returns the file names.
pub fn write_run_report(dir: impl AsRef<Path>, cfg: &PipelineConfig, result: &PipelineResult) -> Result<Vec<&'static str>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| FlickError::io(dir, e))?;
    let mut files = vec![CONFIG_FILE];
    write_json(dir.join(CONFIG_FILE), cfg)?;
    if let Some(m) = &result.cluster_model {
        write_json(dir.join(CLUSTER_MODEL_FILE), m)?;
        files.push(CLUSTER_MODEL_FILE);
    }
    if let Some(r) = &result.refinement {
        write_json(dir.join(CLUSTER_REPORT_FILE), r)?;
        files.push(CLUSTER_REPORT_FILE);
    }
    if let Some(m) = &result.plft_model {
        write_json(dir.join(PLFT_MODEL_FILE), m)?;
        files.push(PLFT_MODEL_FILE);
    }
    if let Some(h) = &result.clsft_init {
        write_json(dir.join(CLSFT_INIT_FILE), h)?;
        files.push(CLSFT_INIT_FILE);
    }
    write_json(dir.join(FINAL_MODEL_FILE), &result.final_model)?;
    files.push(FINAL_MODEL_FILE);
    write_json(
        dir.join(METRICS_FILE),
        &Metrics {
            mode: result.mode,
            evaluation: &result.evaluation,
            final_history: &result.final_history,
            plft_history: result.plft_history.as_ref(),
        },
    )?;
    files.push(METRICS_FILE);
    files.push(RUN_FILE);
    write_json(
        dir.join(RUN_FILE),
        &RunSummary {
            mode: result.mode,
            profile: cfg.profile.name(),
            files: files.clone(),
            accuracy: result.evaluation.accuracy,
            macro_f1: result.evaluation.macro_f1,
            selected_clusters: result.refinement.as_ref().map(|r| r.selection.clusters.as_slice()),
            generated_at_unix: unix_now(),
        },
    )?;
    Ok(files)
}
