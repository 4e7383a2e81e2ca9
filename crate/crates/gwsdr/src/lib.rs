//! Guided weak supervision with directional regularization for classifiers
//! trained on scarce data.
//!
//! Given a large labeled source dataset and a scarce labeled target dataset,
//! this crate:
//!
//! 1. trains a softmax classifier on the target data,
//! 2. matches every target class to its closest source class by posterior
//!    likelihood under that classifier (or its argmax-count approximation),
//! 3. trains a reference classifier on the matched source classes,
//! 4. relabels matched source samples with target labels and retrains the
//!    target classifier on the augmented data, optionally with a directional
//!    penalty pulling the significant eigenvector directions of its reshaped
//!    parameters toward the reference's.
//!
//! The `examples/` directory is the best starting point: one runnable
//! example per capability (`cargo run --example full_pipeline`, etc.). A thin
//! `gwsdr` binary exposes the same operations as subcommands for scripted
//! experiments.
//!
//! Everything is deterministic given its seeds: generators, splits, training
//! batch order, matching subsamples, and sweep outputs.

pub mod check;
pub mod classifier;
pub mod cli;
pub mod dataset;
pub mod dr;
pub mod matching;
pub mod pipeline;
pub mod presets;
pub mod error;

pub use classifier::{ClassifierModel, TrainConfig, TrainTrace};
pub use dataset::{LabeledDataset, Sample, SequenceSpec, SyntheticSpec};
pub use error::{Error, Result};
