//! Few-label text classification over frozen sentence embeddings.
//!
//! The pipeline clusters unlabeled embeddings into pseudo-classes
//! ([`clustering`]), ranks those clusters by how well a probe classifier can
//! recover them and keeps the best ones ([`refinement`]), trains an
//! intermediate classifier on the surviving pseudo-labels, then fine-tunes
//! on a handful of real labels starting from the intermediate hidden layer
//! ([`classifier`], [`pipeline`]). [`evaluation`] scores the result.

pub mod classifier;
pub mod cli;
pub mod clustering;
pub mod error;
pub mod evaluation;
pub mod ingestion;
pub mod pipeline;
pub mod refinement;
pub mod report;
pub mod seed;
pub mod synth;

pub use error::{FlickError, Result, Stage};
