use serde::{Deserialize, Serialize};

use crate::dataset::{Component, Dataset, Label, Side};
use crate::error::{Error, Result};
use crate::model::LosoReport;

/// Tooltip facts about one neighboring example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkInfo {
    pub trial_id: String,
    pub subject_id: String,
    pub side: Side,
    pub status_score: f64,
    pub description: String,
    /// Held-out prediction equals the ground truth.
    pub ai_correct: bool,
    pub ai_label: Label,
    pub ai_confidence: f64,
    pub ground_truth: Label,
    pub annotator_agreement: bool,
}

/// Built only from the dataset and held-out predictions, so the AI fields never
/// reflect a model that saw the neighbor during training.
pub fn benchmark_info(
    neighbor_id: &str,
    dataset: &Dataset,
    loso: &LosoReport,
    component: Component,
) -> Result<BenchmarkInfo> {
    if loso.component != component {
        return Err(Error::validation(format!("LOSO record is for {}, not {component}", loso.component)));
    }
    let prediction = loso
        .get(neighbor_id)
        .ok_or_else(|| Error::NotFound(format!("trial `{neighbor_id}` in the {component} LOSO record")))?;
    let trial = dataset.trial(neighbor_id).ok_or_else(|| Error::NotFound(format!("trial `{neighbor_id}`")))?;
    let subject =
        dataset.subject(&trial.subject_id).ok_or_else(|| Error::NotFound(format!("subject `{}`", trial.subject_id)))?;
    let ground_truth = dataset
        .ground_truth_label(neighbor_id, component)
        .ok_or_else(|| Error::NotFound(format!("ground truth for `{neighbor_id}` ({component})")))?;
    Ok(BenchmarkInfo {
        trial_id: neighbor_id.to_string(),
        subject_id: subject.subject_id.clone(),
        side: trial.side,
        status_score: subject.status_score,
        description: subject.description.clone(),
        ai_correct: prediction.predicted == ground_truth,
        ai_label: prediction.predicted,
        ai_confidence: prediction.confidence,
        ground_truth,
        annotator_agreement: dataset.annotators_agree(neighbor_id, component).unwrap_or(true),
    })
}
