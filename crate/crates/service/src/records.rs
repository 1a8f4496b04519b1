use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rehabxai_core::explain::{EmbeddingSpace, NeighborEmbeddingParams, ProjectionMethod, Representation};
use rehabxai_core::model::GridSearchResult;
use rehabxai_core::study::StudySession;
use rehabxai_core::{Component, LosoReport, ModelConfig, TrainedModel};

/// First 16 bytes of SHA-256, hex-encoded.
pub fn content_id(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..16])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub id: String,
    pub dataset_id: String,
    pub component: Component,
    pub config: ModelConfig,
    /// Held-out predictions of the LOSO evaluation under `config`.
    pub loso: LosoReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSearchResult>,
    /// Trained on every trial of the dataset.
    pub model: TrainedModel,
}

/// A model record without weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub id: String,
    pub dataset_id: String,
    pub component: Component,
    pub config: ModelConfig,
    pub input_dim: usize,
    pub parameter_count: usize,
    pub schema_hash: String,
    pub epoch_losses: Vec<f64>,
    pub loso_f1: f64,
    pub loso_mean_fold_f1: f64,
    pub loso_accuracy: f64,
    pub loso: LosoReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSearchResult>,
}

impl From<&ModelRecord> for ModelSummary {
    fn from(r: &ModelRecord) -> Self {
        Self {
            id: r.id.clone(),
            dataset_id: r.dataset_id.clone(),
            component: r.component,
            config: r.config.clone(),
            input_dim: r.model.input_dim,
            parameter_count: r.config.parameter_count(r.model.input_dim),
            schema_hash: r.model.schema_hash.clone(),
            epoch_losses: r.model.metadata.epoch_losses.clone(),
            loso_f1: r.loso.f1,
            loso_mean_fold_f1: r.loso.mean_fold_f1,
            loso_accuracy: r.loso.accuracy,
            loso: r.loso.clone(),
            grid: r.grid.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceRecord {
    pub id: String,
    pub model_id: String,
    pub dataset_id: String,
    pub component: Component,
    pub method: ProjectionMethod,
    pub representation: Representation,
    pub params: NeighborEmbeddingParams,
    pub space: EmbeddingSpace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session: StudySession,
    pub dataset_id: String,
    pub rom_space: String,
    pub comp_space: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Train,
    GridSearch,
    BuildEmbedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub kind: JobKind,
    pub state: JobState,
    /// Id of the produced model or space; set exactly when `state` is done.
    pub result: Option<String>,
    pub diagnostics: Option<String>,
}

impl JobRecord {
    pub fn queued(id: String, kind: JobKind) -> Self {
        Self { id, kind, state: JobState::Queued, result: None, diagnostics: None }
    }

    /// Moves forward only; a terminal job never changes again.
    pub fn advance(&mut self, state: JobState) -> bool {
        if self.state.is_terminal() || state <= self.state {
            return false;
        }
        self.state = state;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn job_states_only_move_forward() {
        let mut j = JobRecord::queued("j".into(), JobKind::Train);
        assert!(j.advance(JobState::Running));
        assert!(!j.advance(JobState::Queued));
        assert!(j.advance(JobState::Failed));
        assert!(!j.advance(JobState::Done));
        assert_eq!(j.state, JobState::Failed);
    }

    #[test]
    fn content_ids_are_stable() {
        assert_eq!(content_id(b"abc"), content_id(b"abc"));
        assert_ne!(content_id(b"abc"), content_id(b"abd"));
        assert_eq!(content_id(b"").len(), 32);
    }
}
