//! Prediction sets that maximize the accuracy of a human expert who must
//! pick their answer from the set.
//!
//! The expert is modeled as a mixture of multinomial logits parameterized by
//! their confusion matrix. The crate provides the objective, a greedy search
//! with an exhaustive oracle, split-conformal baselines, top-k-label
//! calibration, a synthetic benchmark generator, file formats, the
//! experiment pipeline and an executable form of the clique reduction that
//! makes the exact problem hard.

pub mod calibration;
pub mod conformal;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod hardness;
pub mod ingest;
pub mod objective;
pub mod optimizer;
pub mod rng;
pub mod simgen;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use types::{
    normalize_counts, validate_confusion, ConfusionMatrix, Dataset, InstanceRecord, LabelId,
    PredictionSet, ProbVector, Split,
};
