use flick::ingestion::{self, FewLabelMode, FewLabelSample, LabelTable};
use flick::pipeline::{self, LabeledData, Mode, PipelineConfig, PipelineResult, Profile};
use flick::seed::SeedBundle;
use flick::synth::{self, SynthData, SynthSpec};
use flick::{FlickError, Stage};

fn fixture(noise: f64, seed: u64) -> SynthData {
    synth::generate(&SynthSpec {
        n_unlabeled: 600,
        n_labeled: 60,
        n_heldout: 150,
        dim: 12,
        noise_fraction: noise,
        seed,
        ..SynthSpec::default()
    })
    .unwrap()
}

fn small_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::with_profile(Profile::Proxy);
    cfg.k_clusters = 8;
    cfg.k_top = 6;
    cfg.hidden_size = 32;
    cfg.few_label.count = 30;
    cfg.seeds = SeedBundle::from_master(seed);
    cfg
}

fn run(mode: Mode, cfg: &PipelineConfig, d: &SynthData) -> Result<PipelineResult, FlickError> {
    let few = pipeline::draw_few(cfg, &d.labeled)?;
    pipeline::run_mode(mode, cfg, &d.unlabeled, &d.labeled, &few, &d.heldout)
}

#[test]
fn single_cluster_fails_in_plft() {
    let d = fixture(0.0, 1);
    let mut cfg = small_config(1);
    cfg.k_clusters = 1;
    cfg.k_top = 1;
    let err = run(Mode::Flick, &cfg, &d).unwrap_err();
    assert_eq!(err.stage(), Some(Stage::Plft), "{err}");
    // a classifier over fewer than two classes is a configuration problem
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn flick_transfers_plft_hidden_layer() {
    let d = fixture(0.2, 2);
    let cfg = small_config(2);
    let r = run(Mode::Flick, &cfg, &d).unwrap();
    let plft = r.plft_model.as_ref().unwrap();
    let init = r.clsft_init.as_ref().unwrap();
    assert_eq!(init.w1, plft.w1);
    assert_eq!(init.b1, plft.b1);
    assert_eq!(plft.c, r.refinement.as_ref().unwrap().selection.clusters.len());
    assert_eq!(r.final_model.c, 3);
    assert_eq!(r.evaluation.confusion.total(), 150);
}

#[test]
fn result_roundtrips_through_json() {
    let d = fixture(0.1, 3);
    let cfg = small_config(3);
    let r = run(Mode::Flick, &cfg, &d).unwrap();
    let back: PipelineResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
    let cfg_back: PipelineConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(cfg_back, cfg);
}

#[test]
fn modes_are_deterministic_and_baseline_skips_clustering() {
    let d = fixture(0.3, 4);
    let cfg = small_config(4);
    for mode in [Mode::Flick, Mode::NoRefinement, Mode::Baseline] {
        assert_eq!(run(mode, &cfg, &d).unwrap(), run(mode, &cfg, &d).unwrap());
    }
    let b = run(Mode::Baseline, &cfg, &d).unwrap();
    assert!(b.cluster_model.is_none() && b.refinement.is_none() && b.plft_model.is_none());
    let n = run(Mode::NoRefinement, &cfg, &d).unwrap();
    assert_eq!(n.plft_model.unwrap().c, cfg.k_clusters);
}

#[test]
fn refinement_does_not_hurt_on_noised_clusters() {
    let d = fixture(0.3, 5);
    let cfg = small_config(5);
    let flick = run(Mode::Flick, &cfg, &d).unwrap().evaluation.macro_f1;
    let plain = run(Mode::NoRefinement, &cfg, &d).unwrap().evaluation.macro_f1;
    assert!(flick >= plain, "flick {flick} < no_refinement {plain}");
}

#[test]
fn single_class_label_table_is_rejected() {
    let d = fixture(0.0, 6);
    let cfg = small_config(6);
    let pairs: Vec<(String, String)> = d.labeled.labels.ids().map(|id| (id.to_string(), "only".to_string())).collect();
    let one_class = LabeledData {
        embeddings: d.labeled.embeddings.clone(),
        labels: LabelTable::from_pairs(pairs).unwrap(),
    };
    let few = FewLabelSample::all(&one_class.labels);
    let err = pipeline::run_baseline(&cfg, &one_class, &few, &d.heldout).unwrap_err();
    assert_eq!(err.stage(), Some(Stage::Clsft));
}

#[test]
fn few_labels_overlapping_heldout_are_rejected() {
    let d = fixture(0.0, 6);
    let cfg = small_config(6);
    let few = FewLabelSample::all(&d.labeled.labels);
    let err = pipeline::run_baseline(&cfg, &d.labeled, &few, &d.labeled).unwrap_err();
    assert_eq!(err.stage(), Some(Stage::Clsft));
    assert!(matches!(err.root(), FlickError::Argument(_)));
}

#[test]
fn per_class_shots_draw_exact_counts() {
    let d = fixture(0.0, 7);
    let mut cfg = small_config(7);
    cfg.few_label.mode = FewLabelMode::PerClassShots;
    cfg.few_label.count = 8;
    let few = pipeline::draw_few(&cfg, &d.labeled).unwrap();
    assert_eq!(few.ids.len(), 24);
    let again = ingestion::subsample_few_labels(&d.labeled.labels, FewLabelMode::PerClassShots, 8, cfg.seeds.subsample).unwrap();
    assert_eq!(again.ids, few.ids);
}

#[test]
fn invalid_config_is_rejected_before_work() {
    let d = fixture(0.0, 8);
    let mut cfg = small_config(8);
    cfg.split_train_frac = 1.0;
    assert!(matches!(run(Mode::Flick, &cfg, &d).unwrap_err().root(), FlickError::Config(_)));
}
