//! Rehabilitation motion assessment with explainable outputs.
//!
//! The crate covers the whole offline pipeline: skeleton trial data and a
//! synthetic cohort generator, kinematic feature extraction, a feed-forward
//! classifier with leave-one-subject-out evaluation, example-based (k-NN over
//! activation embeddings) and feature-based (Shapley) explanations, and the
//! reliance-study harness.

pub mod dataset;
pub mod error;
pub mod explain;
pub mod kinematics;
pub mod model;
pub mod study;

pub use dataset::{Component, Dataset, Label};
pub use error::{Error, Result};
pub use kinematics::{FeatureSchema, FeatureVector};
pub use model::{LosoReport, ModelConfig, Prediction, TrainedModel};
