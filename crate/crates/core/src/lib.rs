//! Quality estimation for synthetic code-mixed (Hinglish) sentences.
//!
//! The pipeline has four stages, each in its own module:
//!
//! * [`data`] ingests annotated datasets and token-level tagged sentences and
//!   derives the two regression targets (average quality, disagreement).
//! * [`metrics`] computes LID- and POS-based code-mixing metrics for a sentence.
//! * [`features`] joins those metrics with precomputed language-model features
//!   into a fixed-layout feature vector.
//! * [`regressor`] trains a multilayer perceptron with Adam on those vectors, and
//!   [`eval`] scores its predictions with F1, Cohen's kappa and MSE.
//!
//! [`cli`] wires the stages into the `cmqe` batch command.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod jsonl;
pub mod metrics;
pub mod regressor;

pub use data::{
    derive_targets, parse_dataset, parse_tagged, DatasetRecord, LidLabel, PosLabel, TaggedSentence,
    TaggedToken, Task, TaskTarget,
};
pub use error::{DataError, Error, Result};
pub use eval::{evaluate, EvalReport, F1Average};
pub use features::{assemble_features, FeatureLayout, FeatureRecord, FeatureVector, ScalerParams};
pub use metrics::{metric_vector, MetricVector};
pub use regressor::{MlpConfig, MlpModel, TrainReport};
