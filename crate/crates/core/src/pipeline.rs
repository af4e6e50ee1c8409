//! End-to-end runs.
//!
//! `flick`: cluster the unlabeled rows, refine the pseudo-labels, train an
//! intermediate classifier on the refined set, then fine-tune on the few
//! real labels from its hidden layer. `no_refinement` skips the refinement
//! stage and trains the intermediate classifier on every cluster.
//! `baseline` trains on the few real labels alone.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{self, ClassifierModel, HiddenLayer, TrainConfig, TrainHistory};
use crate::clustering::{self, ClusterModel, InitMethod, KMeansConfig, PseudoLabeledSet};
use crate::error::{FlickError, Result, Stage, StageExt};
use crate::evaluation::{self, EvaluationReport};
use crate::ingestion::{self, EmbeddingSet, FewLabelMode, FewLabelSample, LabelTable};
use crate::refinement::{self, RefinedSet, RefinementAudit};
use crate::seed::{derive_seed, SeedBundle};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Flick,
    NoRefinement,
    Baseline,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Flick => "flick",
            Mode::NoRefinement => "no_refinement",
            Mode::Baseline => "baseline",
        })
    }
}

impl FromStr for Mode {
    type Err = FlickError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flick" => Ok(Mode::Flick),
            "no_refinement" | "no-refinement" => Ok(Mode::NoRefinement),
            "baseline" => Ok(Mode::Baseline),
            other => Err(FlickError::Argument(format!("unknown mode {other:?}"))),
        }
    }
}

/// Optimizer settings shared by every training stage.
///
/// `replication` keeps the transformer fine-tuning values (lr 3e-5,
/// epsilon 1e-6); `proxy` uses lr 1e-3, epsilon 1e-8, which suits a small
/// head trained from scratch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Replication,
    Proxy,
}

impl Profile {
    pub fn learning_rate(self) -> f64 {
        match self {
            Profile::Replication => 3e-5,
            Profile::Proxy => 1e-3,
        }
    }

    pub fn epsilon(self) -> f64 {
        match self {
            Profile::Replication => 1e-6,
            Profile::Proxy => 1e-8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Replication => "replication",
            Profile::Proxy => "proxy",
        }
    }
}

impl FromStr for Profile {
    type Err = FlickError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replication" => Ok(Profile::Replication),
            "proxy" => Ok(Profile::Proxy),
            other => Err(FlickError::Argument(format!("unknown profile {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSchedule {
    pub epochs: usize,
    pub batch_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FewLabelSpec {
    pub mode: FewLabelMode,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub k_clusters: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub kmeans_init: InitMethod,
    pub split_train_frac: f64,
    pub k_top: usize,
    pub hidden_size: usize,
    pub profile: Profile,
    /// Overrides the profile's learning rate when set.
    pub learning_rate: Option<f64>,
    /// Overrides the profile's epsilon when set.
    pub epsilon: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub probe: StageSchedule,
    pub plft: StageSchedule,
    pub clsft: StageSchedule,
    pub seeds: SeedBundle,
    pub few_label: FewLabelSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k_clusters: 20,
            kmeans_max_iter: 300,
            kmeans_tol: 1e-4,
            kmeans_init: InitMethod::KMeansPlusPlus,
            split_train_frac: 0.25,
            k_top: 15,
            hidden_size: 256,
            profile: Profile::Replication,
            learning_rate: None,
            epsilon: None,
            beta1: 0.9,
            beta2: 0.999,
            probe: StageSchedule { epochs: 10, batch_size: 64 },
            plft: StageSchedule { epochs: 1, batch_size: 64 },
            clsft: StageSchedule { epochs: 10, batch_size: 64 },
            seeds: SeedBundle::default(),
            few_label: FewLabelSpec {
                mode: FewLabelMode::TotalCount,
                count: 100,
            },
        }
    }
}

/// Which training stage a [`TrainConfig`] is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainStage {
    Probe,
    Plft,
    Clsft,
}

impl PipelineConfig {
    pub fn with_profile(profile: Profile) -> Self {
        PipelineConfig {
            profile,
            ..Default::default()
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| FlickError::io(path, e))?;
        let cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| FlickError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FlickError::Config(m));
        if self.k_clusters == 0 {
            return bad("k_clusters must be at least 1".into());
        }
        if self.kmeans_max_iter == 0 {
            return bad("kmeans_max_iter must be at least 1".into());
        }
        if self.kmeans_tol.is_nan() || self.kmeans_tol < 0.0 {
            return bad("kmeans_tol must be non-negative".into());
        }
        if !(self.split_train_frac > 0.0 && self.split_train_frac < 1.0) {
            return bad(format!("split_train_frac {} not in (0, 1)", self.split_train_frac));
        }
        if self.k_top == 0 {
            return bad("k_top must be at least 1".into());
        }
        if self.hidden_size == 0 {
            return bad("hidden_size must be at least 1".into());
        }
        if self.few_label.count == 0 {
            return bad("few_label.count must be at least 1".into());
        }
        for stage in [TrainStage::Probe, TrainStage::Plft, TrainStage::Clsft] {
            self.train_config(stage)
                .validate()
                .map_err(|e| FlickError::Config(format!("{stage:?}: {e}")))?;
        }
        Ok(())
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate.unwrap_or(self.profile.learning_rate())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(self.profile.epsilon())
    }

    pub fn kmeans_config(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.k_clusters,
            max_iter: self.kmeans_max_iter,
            tol: self.kmeans_tol,
            seed: self.seeds.cluster,
            init: self.kmeans_init,
        }
    }

    /// Init seed of the model trained in `stage`.
    pub fn init_seed(&self, stage: TrainStage) -> u64 {
        match stage {
            TrainStage::Probe => self.seeds.probe,
            TrainStage::Plft => self.seeds.plft,
            TrainStage::Clsft => self.seeds.clsft,
        }
    }

    pub fn train_config(&self, stage: TrainStage) -> TrainConfig {
        let schedule = match stage {
            TrainStage::Probe => self.probe,
            TrainStage::Plft => self.plft,
            TrainStage::Clsft => self.clsft,
        };
        TrainConfig {
            learning_rate: self.learning_rate(),
            epsilon: self.epsilon(),
            batch_size: schedule.batch_size,
            epochs: schedule.epochs,
            beta1: self.beta1,
            beta2: self.beta2,
            shuffle_seed: derive_seed(self.init_seed(stage), 0x5eed),
        }
    }
}

/// Embeddings with their label table.
#[derive(Clone, Debug)]
pub struct LabeledData {
    pub embeddings: EmbeddingSet,
    pub labels: LabelTable,
}

impl LabeledData {
    pub fn load(embeddings: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Self> {
        Ok(LabeledData {
            embeddings: ingestion::load_embeddings(embeddings)?,
            labels: ingestion::load_labels(labels)?,
        })
    }

    /// Rows and class indices for `ids`, with classes indexed against `classes`.
    pub fn rows_for(&self, ids: &[String], classes: &[String]) -> Result<(EmbeddingSet, Vec<usize>)> {
        let table = if self.labels.class_names() == classes {
            self.labels.clone()
        } else {
            self.labels.reindexed(classes)?
        };
        ingestion::join_labeled(&self.embeddings, &table, ids)
    }

    /// Every labeled row, in label-table order.
    pub fn all_rows(&self, classes: &[String]) -> Result<(EmbeddingSet, Vec<usize>)> {
        let ids: Vec<String> = self.labels.ids().map(str::to_string).collect();
        self.rows_for(&ids, classes)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub mode: Mode,
    pub class_names: Vec<String>,
    pub cluster_model: Option<ClusterModel>,
    pub refinement: Option<RefinementAudit>,
    pub plft_model: Option<ClassifierModel>,
    pub plft_history: Option<TrainHistory>,
    /// Hidden layer of the final model as it stood before Cls-FT training.
    pub clsft_init: Option<HiddenLayer>,
    pub final_model: ClassifierModel,
    pub final_history: TrainHistory,
    pub evaluation: EvaluationReport,
}

/// Artifacts of clustering the unlabeled rows.
#[derive(Clone, Debug)]
pub struct Stage1 {
    pub model: ClusterModel,
    pub pseudo: PseudoLabeledSet,
}

pub fn run_stage1(cfg: &PipelineConfig, unlabeled: &EmbeddingSet) -> Result<Stage1> {
    let run = || -> Result<Stage1> {
        let model = clustering::kmeans_fit(unlabeled, &cfg.kmeans_config())?;
        let pseudo = clustering::pseudo_label(unlabeled, &model)?;
        log::info!(
            "stage1: {} rows into {} clusters, {} iterations, inertia {:.4}",
            unlabeled.len(),
            model.k,
            model.iterations_run,
            model.inertia
        );
        Ok(Stage1 { model, pseudo })
    };
    run().stage(Stage::Stage1)
}

/// Split, probe, rank and select.
pub fn run_stage2(
    cfg: &PipelineConfig,
    unlabeled: &EmbeddingSet,
    pseudo: &PseudoLabeledSet,
) -> Result<(RefinedSet, RefinementAudit)> {
    let run = || -> Result<(RefinedSet, RefinementAudit)> {
        let split = refinement::stratified_split(pseudo, cfg.split_train_frac, cfg.seeds.split)?;
        let (_, report) = refinement::probe_and_report(
            pseudo,
            &split,
            unlabeled,
            cfg.hidden_size,
            &cfg.train_config(TrainStage::Probe),
            cfg.init_seed(TrainStage::Probe),
        )?;
        let selection = refinement::select_top_k(&report, cfg.k_top)?;
        let refined = refinement::build_refined(pseudo, &selection.clusters)?;
        log::info!(
            "stage2: probe accuracy {:.4}, kept clusters {:?} ({} records)",
            report.probe_overall_accuracy,
            selection.clusters,
            refined.len()
        );
        let audit = RefinementAudit::new(&split, report, selection, &refined);
        Ok((refined, audit))
    };
    run().stage(Stage::Stage2)
}

fn train_plft(
    cfg: &PipelineConfig,
    x: &EmbeddingSet,
    y: &[usize],
    classes: usize,
) -> Result<(ClassifierModel, TrainHistory)> {
    let run = || -> Result<(ClassifierModel, TrainHistory)> {
        let mut model = classifier::init_classifier(x.dim(), cfg.hidden_size, classes, cfg.init_seed(TrainStage::Plft))?;
        model.profile_name = Some(cfg.profile.name().to_string());
        let out = classifier::train(&model, x, y, &cfg.train_config(TrainStage::Plft))?;
        log::info!("plft: {} records, {classes} pseudo-classes, loss {:.4}", x.len(), out.1.final_loss);
        Ok(out)
    };
    run().stage(Stage::Plft)
}

struct FewLabeled {
    x: EmbeddingSet,
    y: Vec<usize>,
    classes: Vec<String>,
}

fn prepare_few(labeled: &LabeledData, few: &FewLabelSample, heldout: &LabeledData) -> Result<FewLabeled> {
    let run = || -> Result<FewLabeled> {
        let classes = labeled.labels.class_names().to_vec();
        if classes.len() < 2 {
            return Err(FlickError::Argument(format!(
                "need at least 2 real classes, got {}",
                classes.len()
            )));
        }
        if few.ids.is_empty() {
            return Err(FlickError::Argument("few-label sample is empty".into()));
        }
        let held: HashSet<&str> = heldout.labels.ids().collect();
        if let Some(id) = few.ids.iter().find(|id| held.contains(id.as_str())) {
            return Err(FlickError::Argument(format!("id {id:?} is both few-labeled and held out")));
        }
        let (x, y) = labeled.rows_for(&few.ids, &classes)?;
        Ok(FewLabeled { x, y, classes })
    };
    run().stage(Stage::Clsft)
}

fn evaluate(model: &ClassifierModel, heldout: &LabeledData, classes: &[String]) -> Result<EvaluationReport> {
    let run = || -> Result<EvaluationReport> {
        let (x, truth) = heldout.all_rows(classes)?;
        let predicted = classifier::predict(model, &x)?;
        Ok(evaluation::evaluate(&truth, &predicted, classes.len())?.with_class_names(classes))
    };
    run().stage(Stage::Eval)
}

/// Cls-FT from a PL-FT model, then evaluation.
fn finish_from(
    cfg: &PipelineConfig,
    mode: Mode,
    stage1: Option<Stage1>,
    refinement: Option<RefinementAudit>,
    plft: (ClassifierModel, TrainHistory),
    few: FewLabeled,
    heldout: &LabeledData,
) -> Result<PipelineResult> {
    let (plft_model, plft_history) = plft;
    let (final_model, final_history, snapshot) = (|| -> Result<_> {
        let init = classifier::transfer_init(&plft_model, few.classes.len(), cfg.init_seed(TrainStage::Clsft))?;
        let snapshot = init.hidden_layer();
        let (m, h) = classifier::train(&init, &few.x, &few.y, &cfg.train_config(TrainStage::Clsft))?;
        Ok((m, h, snapshot))
    })()
    .stage(Stage::Clsft)?;
    let evaluation = evaluate(&final_model, heldout, &few.classes)?;
    log::info!("{mode}: accuracy {:.4}, macro-F1 {:.4}", evaluation.accuracy, evaluation.macro_f1);
    Ok(PipelineResult {
        mode,
        class_names: few.classes,
        cluster_model: stage1.map(|s| s.model),
        refinement,
        plft_model: Some(plft_model),
        plft_history: Some(plft_history),
        clsft_init: Some(snapshot),
        final_model,
        final_history,
        evaluation,
    })
}

pub fn run_flick(
    cfg: &PipelineConfig,
    unlabeled: &EmbeddingSet,
    labeled: &LabeledData,
    few: &FewLabelSample,
    heldout: &LabeledData,
) -> Result<PipelineResult> {
    cfg.validate()?;
    let few = prepare_few(labeled, few, heldout)?;
    let stage1 = run_stage1(cfg, unlabeled)?;
    let (refined, audit) = run_stage2(cfg, unlabeled, &stage1.pseudo)?;
    let refined_x = unlabeled.subset(&refined.positions).stage(Stage::Plft)?;
    let plft = train_plft(cfg, &refined_x, &refined.labels, refined.num_classes())?;
    finish_from(cfg, Mode::Flick, Some(stage1), Some(audit), plft, few, heldout)
}

pub fn run_no_refinement(
    cfg: &PipelineConfig,
    unlabeled: &EmbeddingSet,
    labeled: &LabeledData,
    few: &FewLabelSample,
    heldout: &LabeledData,
) -> Result<PipelineResult> {
    cfg.validate()?;
    let few = prepare_few(labeled, few, heldout)?;
    let stage1 = run_stage1(cfg, unlabeled)?;
    let plft = train_plft(cfg, unlabeled, &stage1.pseudo.pseudo_labels, stage1.model.k)?;
    finish_from(cfg, Mode::NoRefinement, Some(stage1), None, plft, few, heldout)
}

pub fn run_baseline(
    cfg: &PipelineConfig,
    labeled: &LabeledData,
    few: &FewLabelSample,
    heldout: &LabeledData,
) -> Result<PipelineResult> {
    cfg.validate()?;
    let few = prepare_few(labeled, few, heldout)?;
    let (final_model, final_history) = (|| -> Result<_> {
        let mut model = classifier::init_classifier(
            few.x.dim(),
            cfg.hidden_size,
            few.classes.len(),
            cfg.init_seed(TrainStage::Clsft),
        )?;
        model.profile_name = Some(cfg.profile.name().to_string());
        classifier::train(&model, &few.x, &few.y, &cfg.train_config(TrainStage::Clsft))
    })()
    .stage(Stage::Clsft)?;
    let evaluation = evaluate(&final_model, heldout, &few.classes)?;
    log::info!("baseline: accuracy {:.4}, macro-F1 {:.4}", evaluation.accuracy, evaluation.macro_f1);
    Ok(PipelineResult {
        mode: Mode::Baseline,
        class_names: few.classes,
        cluster_model: None,
        refinement: None,
        plft_model: None,
        plft_history: None,
        clsft_init: None,
        final_model,
        final_history,
        evaluation,
    })
}

/// Draws the few-label sample described by the config.
pub fn draw_few(cfg: &PipelineConfig, labeled: &LabeledData) -> Result<FewLabelSample> {
    ingestion::subsample_few_labels(
        &labeled.labels,
        cfg.few_label.mode,
        cfg.few_label.count,
        cfg.seeds.subsample,
    )
    .stage(Stage::Clsft)
}

pub fn run_mode(
    mode: Mode,
    cfg: &PipelineConfig,
    unlabeled: &EmbeddingSet,
    labeled: &LabeledData,
    few: &FewLabelSample,
    heldout: &LabeledData,
) -> Result<PipelineResult> {
    match mode {
        Mode::Flick => run_flick(cfg, unlabeled, labeled, few, heldout),
        Mode::NoRefinement => run_no_refinement(cfg, unlabeled, labeled, few, heldout),
        Mode::Baseline => run_baseline(cfg, labeled, few, heldout),
    }
}
