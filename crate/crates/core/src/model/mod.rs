//! Feed-forward classifier trained with plain SGD, plus leave-one-subject-out
//! evaluation, grid search, and classification metrics.

mod grid;
mod loso;
mod metrics;
mod network;
mod train;

pub use grid::{grid_search, Grid, GridCell, GridSearchResult};
pub use loso::{
    evaluate_loso, evaluate_loso_on, fold_model, FoldSummary, LabeledSet, LosoOptions, LosoReport, TrialPrediction,
};
pub use metrics::{f1_score, Confusion};
pub use network::{
    forward, init_model, Gradients, InputScaler, Layer, ModelConfig, Prediction, TrainedModel, TrainingMetadata,
};
pub use train::{train, train_samples};
