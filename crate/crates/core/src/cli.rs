//! Command-line front end. `src/bin/flick.rs` only calls [`main`].
//!
//! Exit codes: 0 success, 2 bad arguments, 3 data or format error,
//! 4 numeric error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifier::{self, ClassifierModel};
use crate::clustering::{ClusterModel, PseudoLabeledSet};
use crate::error::{FlickError, Result, Stage, StageExt};
use crate::evaluation;
use crate::ingestion::{self, FewLabelMode, FewLabelSample};
use crate::pipeline::{self, LabeledData, Mode, PipelineConfig, Profile, TrainStage};
use crate::refinement::RefinementAudit;
use crate::report::{self, write_json};
use crate::seed::SeedBundle;
use crate::synth::{self, SynthSpec};

#[derive(Parser, Debug)]
#[command(name = "flick", version, about = "Few-label classification with refined cluster pseudo-labels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic Gaussian-blob fixture.
    Synth(SynthArgs),
    /// K-means over unlabeled embeddings; writes pseudo-labels.
    Cluster(ClusterArgs),
    /// Probe, rank and select clusters; writes the cluster report.
    Refine(RefineArgs),
    /// Train a classifier head on labeled embeddings.
    Train(TrainArgs),
    /// Score a trained model on labeled embeddings.
    Eval(EvalArgs),
    /// Full pipeline run.
    Run(RunArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Pipeline config JSON; defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed, expanded into one seed per stage.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = ["replication", "proxy"])]
    pub profile: Option<String>,
    /// Override any config field, e.g. `--set k_top=10 --set plft.epochs=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub n_unlabeled: usize,
    #[arg(long, default_value_t = 100)]
    pub n_labeled: usize,
    #[arg(long, default_value_t = 600)]
    pub n_heldout: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.5)]
    pub cluster_std: f64,
    #[arg(long, default_value_t = 10.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct RefineArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// `pseudo_labels.jsonl` written by `flick cluster`.
    #[arg(long)]
    pub pseudo_labels: PathBuf,
    /// `cluster_model.json` from the same run; fixes the cluster count when
    /// trailing clusters are empty.
    #[arg(long)]
    pub cluster_model: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Start from this model's hidden layer with a fresh output layer.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Schedule and seed to use.
    #[arg(long, value_parser = ["plft", "clsft"], default_value = "clsft")]
    pub stage: String,
    /// Train on a stratified sample of this many labeled records.
    #[arg(long, conflicts_with = "shots")]
    pub few_count: Option<usize>,
    /// Train on this many records per class.
    #[arg(long)]
    pub shots: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Class names of the model's outputs, in order; defaults to the label
    /// file's sorted classes.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub unlabeled: PathBuf,
    #[arg(long)]
    pub labeled: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub heldout: PathBuf,
    #[arg(long)]
    pub heldout_labels: PathBuf,
    #[arg(long, value_parser = ["flick", "no_refinement", "baseline"], default_value = "flick")]
    pub mode: String,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Applies `key=value` (dotted keys reach nested fields). Values parse as
/// JSON, falling back to a plain string.
fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| FlickError::Argument(format!("override {assignment:?} is not KEY=VALUE")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| FlickError::Argument(format!("{key}: {part} is not an object field")))?;
        if !obj.contains_key(*part) {
            return Err(FlickError::Argument(format!("unknown config field {key:?}")));
        }
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.get_mut(*part).expect("checked above");
    }
    unreachable!("split yields at least one part")
}

pub fn resolve_config(common: &CommonArgs) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::from_json_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seeds = SeedBundle::from_master(seed);
    }
    if let Some(p) = &common.profile {
        cfg.profile = p.parse::<Profile>()?;
    }
    if !common.overrides.is_empty() {
        let mut value = serde_json::to_value(&cfg).expect("config serializes");
        for o in &common.overrides {
            apply_override(&mut value, o)?;
        }
        cfg = serde_json::from_value(value).map_err(|e| FlickError::Config(e.to_string()))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| FlickError::io(dir, e))
}

#[derive(Serialize, Deserialize)]
struct PseudoLine {
    id: String,
    cluster: usize,
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>) -> Result<()> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&serde_json::to_string(&row).expect("row serializes"));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| FlickError::io(path, e))
}

pub fn read_pseudo_labels(path: &Path, k: Option<usize>) -> Result<PseudoLabeledSet> {
    let text = std::fs::read_to_string(path).map_err(|e| FlickError::io(path, e))?;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: PseudoLine = serde_json::from_str(line)
            .map_err(|e| FlickError::Format(format!("{} line {}: {e}", path.display(), n + 1)))?;
        ids.push(row.id);
        labels.push(row.cluster);
    }
    let k = k.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    PseudoLabeledSet::new(ids, labels, k).map_err(|e| FlickError::Data(e.to_string()))
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n_unlabeled: args.n_unlabeled,
        n_labeled: args.n_labeled,
        n_heldout: args.n_heldout,
        classes: args.classes,
        dim: args.dim,
        cluster_std: args.cluster_std,
        center_separation: args.separation,
        noise_fraction: args.noise_fraction,
        seed: args.seed,
    };
    let data = synth::generate(&spec)?;
    synth::write_fixture(&spec, &data, &args.out)?;
    println!(
        "wrote fixture to {} ({} unlabeled, {} swapped)",
        args.out.display(),
        data.unlabeled.len(),
        data.noised.len()
    );
    Ok(())
}

fn cmd_cluster(args: &ClusterArgs) -> Result<()> {
    let cfg = resolve_config(&args.common)?;
    let x = ingestion::load_embeddings(&args.embeddings)?;
    let stage1 = pipeline::run_stage1(&cfg, &x)?;
    let out = &args.common.out;
    ensure_dir(out)?;
    write_json(out.join(report::CLUSTER_MODEL_FILE), &stage1.model)?;
    write_jsonl(
        &out.join("pseudo_labels.jsonl"),
        stage1.pseudo.ids.iter().zip(&stage1.pseudo.pseudo_labels).map(|(id, &c)| PseudoLine {
            id: id.clone(),
            cluster: c,
        }),
    )?;
    println!(
        "{} clusters, {} iterations, inertia {:.4}",
        stage1.model.k, stage1.model.iterations_run, stage1.model.inertia
    );
    Ok(())
}

#[derive(Serialize)]
struct RefinedLine<'a> {
    id: &'a str,
    cluster: usize,
    label: usize,
}

fn cmd_refine(args: &RefineArgs) -> Result<()> {
    let cfg = resolve_config(&args.common)?;
    let x = ingestion::load_embeddings(&args.embeddings)?;
    let k = match &args.cluster_model {
        Some(path) => Some(report::read_json::<ClusterModel>(path)?.k),
        None => None,
    };
    let pseudo = read_pseudo_labels(&args.pseudo_labels, k)?;
    // rows may come in any order; align them to the pseudo-label file
    let x = x.select(&pseudo.ids)?;
    let (refined, audit): (_, RefinementAudit) = pipeline::run_stage2(&cfg, &x, &pseudo)?;
    let out = &args.common.out;
    ensure_dir(out)?;
    write_json(out.join(report::CLUSTER_REPORT_FILE), &audit)?;
    write_jsonl(
        &out.join("refined.jsonl"),
        refined.ids.iter().zip(&refined.positions).zip(&refined.labels).map(|((id, &p), &l)| RefinedLine {
            id,
            cluster: pseudo.pseudo_labels[p],
            label: l,
        }),
    )?;
    println!("{}", render_cluster_report(&audit));
    Ok(())
}

pub fn render_cluster_report(audit: &RefinementAudit) -> String {
    let mut s = format!(
        "{:>8}{:>8}{:>10}{:>9}{:>10}\n",
        "cluster", "size", "support", "correct", "accuracy"
    );
    for r in &audit.report.rows {
        let acc = r.accuracy.map_or("n/a".to_string(), |a| format!("{a:.4}"));
        s.push_str(&format!(
            "{:>8}{:>8}{:>10}{:>9}{:>10}\n",
            r.cluster_id, r.size, r.test_support, r.correct, acc
        ));
    }
    s.push_str(&format!(
        "probe accuracy {:.4}; selected {:?}",
        audit.report.probe_overall_accuracy, audit.selection.clusters
    ));
    for w in &audit.warnings {
        s.push_str(&format!("\nwarning: {w}"));
    }
    s
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let cfg = resolve_config(&args.common)?;
    let data = LabeledData::load(&args.embeddings, &args.labels)?;
    let (stage, tag) = match args.stage.as_str() {
        "plft" => (TrainStage::Plft, Stage::Plft),
        _ => (TrainStage::Clsft, Stage::Clsft),
    };
    let few = match (args.few_count, args.shots) {
        (Some(n), _) => ingestion::subsample_few_labels(&data.labels, FewLabelMode::TotalCount, n, cfg.seeds.subsample)?,
        (None, Some(s)) => ingestion::subsample_few_labels(&data.labels, FewLabelMode::PerClassShots, s, cfg.seeds.subsample)?,
        (None, None) => FewLabelSample::all(&data.labels),
    };
    let classes = data.labels.class_names().to_vec();
    let run = || -> Result<(ClassifierModel, classifier::TrainHistory)> {
        let (x, y) = data.rows_for(&few.ids, &classes)?;
        let init = match &args.init {
            Some(path) => {
                let source: ClassifierModel = report::read_json(path)?;
                classifier::transfer_init(&source, classes.len(), cfg.init_seed(stage))?
            }
            None => classifier::init_classifier(x.dim(), cfg.hidden_size, classes.len(), cfg.init_seed(stage))?,
        };
        let mut init = init;
        init.profile_name = Some(cfg.profile.name().to_string());
        classifier::train(&init, &x, &y, &cfg.train_config(stage))
    };
    let (model, history) = run().stage(tag)?;
    let out = &args.common.out;
    ensure_dir(out)?;
    write_json(out.join("model.json"), &model)?;
    write_json(out.join("history.json"), &history)?;
    write_json(out.join("classes.json"), &classes)?;
    println!(
        "trained on {} records, {} classes, final loss {:.4}",
        few.ids.len(),
        classes.len(),
        history.final_loss
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let model: ClassifierModel = report::read_json(&args.model)?;
    let data = LabeledData::load(&args.embeddings, &args.labels)?;
    let classes = args
        .classes
        .clone()
        .unwrap_or_else(|| data.labels.class_names().to_vec());
    let run = || -> Result<evaluation::EvaluationReport> {
        if classes.len() != model.c {
            return Err(FlickError::Argument(format!(
                "model has {} outputs but {} class names were given",
                model.c,
                classes.len()
            )));
        }
        let (x, truth) = data.all_rows(&classes)?;
        let predicted = classifier::predict(&model, &x)?;
        Ok(evaluation::evaluate(&truth, &predicted, classes.len())?.with_class_names(&classes))
    };
    let report = run().stage(Stage::Eval)?;
    print!("{}", report.render_table());
    if let Some(out) = &args.out {
        ensure_dir(out)?;
        write_json(out.join(report::METRICS_FILE), &report)?;
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = resolve_config(&args.common)?;
    let mode: Mode = args.mode.parse()?;
    let labeled = LabeledData::load(&args.labeled, &args.labels)?;
    let heldout = LabeledData::load(&args.heldout, &args.heldout_labels)?;
    let few = pipeline::draw_few(&cfg, &labeled)?;
    let result = match mode {
        Mode::Baseline => pipeline::run_baseline(&cfg, &labeled, &few, &heldout)?,
        _ => {
            let unlabeled = ingestion::load_embeddings(&args.unlabeled)?;
            pipeline::run_mode(mode, &cfg, &unlabeled, &labeled, &few, &heldout)?
        }
    };
    report::write_run_report(&args.common.out, &cfg, &result)?;
    if let Some(audit) = &result.refinement {
        println!("{}", render_cluster_report(audit));
    }
    print!("{}", result.evaluation.render_table());
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Refine(a) => cmd_refine(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Run(a) => cmd_run(a),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("FLICK_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

pub fn main() -> ! {
    init_logging();
    std::process::exit(run(std::env::args_os()))
}
