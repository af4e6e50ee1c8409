//! Synthetic Gaussian-blob fixtures.
//!
//! Class `z` is centred at `separation / sqrt(2) * e_z`, so every pair of
//! centres is exactly `separation` apart. Points get isotropic Gaussian
//! noise with standard deviation `cluster_std`. A `noise_fraction` of the
//! unlabeled points is drawn from a different class's blob than the one
//! their generator label names.

use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{FlickError, Result};
use crate::ingestion::{self, EmbeddingSet, LabelTable};
use crate::pipeline::LabeledData;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_unlabeled: usize,
    pub n_labeled: usize,
    pub n_heldout: usize,
    pub classes: usize,
    pub dim: usize,
    pub cluster_std: f64,
    pub center_separation: f64,
    pub noise_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_unlabeled: 2000,
            n_labeled: 100,
            n_heldout: 600,
            classes: 3,
            dim: 32,
            cluster_std: 0.5,
            center_separation: 10.0,
            noise_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FlickError::Argument(m));
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.classes > self.dim {
            return bad(format!("{} classes do not fit in dim {}", self.classes, self.dim));
        }
        if !(self.cluster_std > 0.0 && self.cluster_std.is_finite()) {
            return bad("cluster_std must be positive".into());
        }
        if !(self.center_separation >= 0.0 && self.center_separation.is_finite()) {
            return bad("center_separation must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return bad(format!("noise_fraction {} not in [0, 1]", self.noise_fraction));
        }
        if self.n_unlabeled == 0 || self.n_labeled == 0 || self.n_heldout == 0 {
            return bad("every split needs at least one record".into());
        }
        Ok(())
    }

    pub fn noised_count(&self) -> usize {
        (self.noise_fraction * self.n_unlabeled as f64).round() as usize
    }
}

#[derive(Clone, Debug)]
pub struct SynthData {
    pub unlabeled: EmbeddingSet,
    /// Generator labels of the unlabeled rows; never seen by the pipeline.
    pub unlabeled_truth: LabelTable,
    /// Positions of unlabeled rows drawn from a wrong blob.
    pub noised: Vec<usize>,
    pub labeled: LabeledData,
    pub heldout: LabeledData,
}

pub fn class_name(z: usize) -> String {
    format!("class{z}")
}

struct Blobs {
    scale: f32,
    noise: Normal<f32>,
    dim: usize,
}

impl Blobs {
    fn draw(&self, class: usize, rng: &mut seed::Rng, out: &mut Vec<f32>) {
        for j in 0..self.dim {
            let center = if j == class { self.scale } else { 0.0 };
            out.push(center + self.noise.sample(rng));
        }
    }
}

fn split_rows(
    prefix: &str,
    n: usize,
    spec: &SynthSpec,
    blobs: &Blobs,
    rng: &mut seed::Rng,
) -> Result<(EmbeddingSet, LabelTable)> {
    let mut ids = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * spec.dim);
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % spec.classes;
        let id = format!("{prefix}{i:05}");
        blobs.draw(class, rng, &mut values);
        pairs.push((id.clone(), class_name(class)));
        ids.push(id);
    }
    Ok((
        EmbeddingSet::new(ids, values, spec.dim)?,
        LabelTable::from_pairs(pairs)?,
    ))
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let blobs = Blobs {
        scale: (spec.center_separation / std::f64::consts::SQRT_2) as f32,
        noise: Normal::new(0.0, spec.cluster_std as f32)
            .map_err(|e| FlickError::Argument(e.to_string()))?,
        dim: spec.dim,
    };
    let mut rng = seed::rng(spec.seed);

    let n = spec.n_unlabeled;
    let mut noised = index::sample(&mut rng, n, spec.noised_count()).into_vec();
    noised.sort_unstable();
    let mut is_noised = vec![false; n];
    for &i in &noised {
        is_noised[i] = true;
    }
    let mut ids = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * spec.dim);
    let mut truth = Vec::with_capacity(n);
    for (i, &swapped) in is_noised.iter().enumerate() {
        let class = i % spec.classes;
        let source = if swapped {
            (class + 1 + rng.random_range(0..spec.classes - 1)) % spec.classes
        } else {
            class
        };
        blobs.draw(source, &mut rng, &mut values);
        let id = format!("u{i:05}");
        truth.push((id.clone(), class_name(class)));
        ids.push(id);
    }
    let unlabeled = EmbeddingSet::new(ids, values, spec.dim)?;
    let unlabeled_truth = LabelTable::from_pairs(truth)?;

    let (emb, labels) = split_rows("l", spec.n_labeled, spec, &blobs, &mut rng)?;
    let labeled = LabeledData { embeddings: emb, labels };
    let (emb, labels) = split_rows("h", spec.n_heldout, spec, &blobs, &mut rng)?;
    let heldout = LabeledData { embeddings: emb, labels };

    Ok(SynthData {
        unlabeled,
        unlabeled_truth,
        noised,
        labeled,
        heldout,
    })
}

/// File names written by [`write_fixture`].
pub struct FixturePaths {
    pub unlabeled: PathBuf,
    pub unlabeled_truth: PathBuf,
    pub labeled: PathBuf,
    pub labeled_labels: PathBuf,
    pub heldout: PathBuf,
    pub heldout_labels: PathBuf,
    pub manifest: PathBuf,
}

impl FixturePaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let d = dir.as_ref();
        FixturePaths {
            unlabeled: d.join("unlabeled.flke"),
            unlabeled_truth: d.join("unlabeled_truth.jsonl"),
            labeled: d.join("labeled.flke"),
            labeled_labels: d.join("labeled.jsonl"),
            heldout: d.join("heldout.flke"),
            heldout_labels: d.join("heldout.jsonl"),
            manifest: d.join("synth.json"),
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    spec: &'a SynthSpec,
    noised_count: usize,
}

pub fn write_fixture(spec: &SynthSpec, data: &SynthData, dir: impl AsRef<Path>) -> Result<FixturePaths> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| FlickError::io(dir, e))?;
    let paths = FixturePaths::in_dir(dir);
    ingestion::write_embeddings(&data.unlabeled, &paths.unlabeled)?;
    ingestion::write_labels(&data.unlabeled_truth, &paths.unlabeled_truth)?;
    ingestion::write_embeddings(&data.labeled.embeddings, &paths.labeled)?;
    ingestion::write_labels(&data.labeled.labels, &paths.labeled_labels)?;
    ingestion::write_embeddings(&data.heldout.embeddings, &paths.heldout)?;
    ingestion::write_labels(&data.heldout.labels, &paths.heldout_labels)?;
    let manifest = Manifest {
        spec,
        noised_count: data.noised.len(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&paths.manifest, text + "\n").map_err(|e| FlickError::io(&paths.manifest, e))?;
    Ok(paths)
}
