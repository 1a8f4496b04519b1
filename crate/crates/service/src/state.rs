use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use rehabxai_core::dataset::{dataset_from_json, dataset_to_json, generate_synthetic, loso_splits, SynthConfig};
use rehabxai_core::explain::{
    build_embedding_space, check_partition, explain_case, AttributionMode, ComponentInputs, ExplainOptions,
    ExplanationPayload, Metric, NeighborEmbeddingParams, ProjectionMethod, Representation, SpaceKind, DEFAULT_K,
};
use rehabxai_core::model::{evaluate_loso_on, fold_model, grid_search, Grid, LabeledSet, LosoOptions};
use rehabxai_core::study::{
    analyze_events, compute_performance, create_batch, export_events, Assessment, Condition, PerformanceBlock,
    RelianceReport, StudyConfig, TruthTable,
};
use rehabxai_core::{Component, Dataset, Label, ModelConfig, Prediction, TrainedModel};

use crate::error::{ApiError, ApiResult};
use crate::records::{content_id, JobKind, JobRecord, JobState, ModelRecord, SessionRecord, SpaceRecord};
use crate::store::{Kind, Store};

pub const DEFAULT_WORKERS: usize = 2;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub port: u16,
    pub store_root: PathBuf,
    /// Used when a request omits its seed.
    pub seed: u64,
    pub workers: usize,
}

impl ServiceConfig {
    pub fn new(store_root: impl Into<PathBuf>) -> Self {
        Self { port: 8080, store_root: store_root.into(), seed: 0, workers: DEFAULT_WORKERS }
    }
}

#[derive(Default)]
struct Cache {
    datasets: HashMap<String, Arc<Dataset>>,
    sets: HashMap<(String, Component), Arc<LabeledSet>>,
    models: HashMap<String, Arc<ModelRecord>>,
    spaces: HashMap<String, Arc<SpaceRecord>>,
    fold_models: HashMap<(String, String), Arc<TrainedModel>>,
}

struct Inner {
    store: Store,
    jobs: Semaphore,
    seed: u64,
    // Datasets, models and spaces are content-addressed and never change, so
    // cached copies cannot go stale.
    cache: Mutex<Cache>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateDataset {
    pub synthetic: Option<SynthConfig>,
    pub seed: Option<u64>,
    pub dataset: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub id: String,
    pub n_subjects: usize,
    pub n_trials: usize,
    pub created: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRequest {
    pub dataset_id: String,
    pub component: Component,
    pub n_hidden_layers: Option<usize>,
    pub hidden_units: Option<usize>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    /// Pick the architecture by LOSO grid search before training.
    #[serde(default)]
    pub grid: bool,
    #[serde(default)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildSpaceRequest {
    pub model_id: String,
    #[serde(default)]
    pub method: ProjectionMethod,
    #[serde(default)]
    pub representation: Representation,
    pub params: Option<NeighborEmbeddingParams>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ExplainQuery {
    pub case: String,
    pub k: Option<usize>,
    pub metric: Option<String>,
    pub space: Option<String>,
    pub session: Option<String>,
    pub rom_space: Option<String>,
    pub comp_space: Option<String>,
    /// Permutations for sampled attribution; exact over channel groups when absent.
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessions {
    pub participant_id: Option<String>,
    #[serde(default)]
    pub participants: Vec<String>,
    pub rom_space: String,
    pub comp_space: String,
    pub seed: Option<u64>,
    pub config: Option<StudyConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCase {
    pub position: usize,
    pub trial_id: String,
    pub condition: Condition,
}

/// What a participant's client may see of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub participant_id: String,
    pub order: [Condition; 2],
    pub components: Vec<Component>,
    pub cases: Vec<SessionCase>,
    pub recorded: usize,
    pub required: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessmentInput {
    pub case_id: String,
    pub component: Component,
    pub phase: rehabxai_core::study::Phase,
    pub label: Label,
    pub t_video_start: f64,
    pub t_submit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: String,
    pub report: RelianceReport,
    pub performance: Vec<PerformanceBlock>,
    pub text: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    pub features: Option<Vec<f64>>,
    pub trial_id: Option<String>,
}

fn view(record: &SessionRecord) -> SessionView {
    let s = &record.session;
    let cases = s
        .cases()
        .enumerate()
        .map(|(i, (condition, c))| SessionCase { position: i, trial_id: c.trial_id.clone(), condition })
        .collect::<Vec<_>>();
    let required = cases.len() * s.config.components.len() * 2;
    SessionView {
        id: s.session_id.clone(),
        participant_id: s.participant_id.clone(),
        order: s.order,
        components: s.config.components.clone(),
        cases,
        recorded: s.assessments.len(),
        required,
    }
}

fn json_bytes<T: Serialize>(value: &T) -> ApiResult<Vec<u8>> {
    serde_json::to_vec(value).map_err(|e| ApiError::internal(e.to_string()))
}

impl AppState {
    pub fn new(config: &ServiceConfig) -> ApiResult<Self> {
        let store = Store::open(&config.store_root)?;
        Ok(Self {
            inner: Arc::new(Inner {
                store,
                jobs: Semaphore::new(config.workers.max(1)),
                seed: config.seed,
                cache: Mutex::new(Cache::default()),
            }),
        })
    }

    pub fn store(&self) -> &Store {
        &self.inner.store
    }

    pub fn create_dataset(&self, req: CreateDataset) -> ApiResult<DatasetSummary> {
        let dataset = match (req.synthetic, req.dataset) {
            (Some(cfg), None) => generate_synthetic(&cfg, req.seed.unwrap_or(self.inner.seed))?,
            (None, Some(doc)) => {
                if req.seed.is_some() {
                    return Err(ApiError::bad_request("`seed` applies only to synthetic datasets"));
                }
                dataset_from_json(&doc.to_string())?
            }
            _ => return Err(ApiError::bad_request("provide exactly one of `synthetic` or `dataset`")),
        };
        let json = dataset_to_json(&dataset)?;
        let id = content_id(json.as_bytes());
        let value: serde_json::Value = serde_json::from_str(&json).map_err(|e| ApiError::internal(e.to_string()))?;
        let created = self.store().put_new(Kind::Datasets, &id, &value)?;
        let summary = DatasetSummary {
            id: id.clone(),
            n_subjects: dataset.subjects.len(),
            n_trials: dataset.trials.len(),
            created,
        };
        self.inner.cache.lock().datasets.insert(id, Arc::new(dataset));
        Ok(summary)
    }

    pub fn dataset(&self, id: &str) -> ApiResult<Arc<Dataset>> {
        if let Some(d) = self.inner.cache.lock().datasets.get(id) {
            return Ok(d.clone());
        }
        let bytes = self
            .store()
            .get_bytes(Kind::Datasets, id)?
            .ok_or_else(|| ApiError::not_found(format!("dataset `{id}`")))?;
        let text = String::from_utf8(bytes).map_err(|e| ApiError::internal(e.to_string()))?;
        let d = Arc::new(dataset_from_json(&text).map_err(|e| ApiError::internal(e.to_string()))?);
        self.inner.cache.lock().datasets.insert(id.to_string(), d.clone());
        Ok(d)
    }

    pub fn dataset_json(&self, id: &str) -> ApiResult<Vec<u8>> {
        self.store().get_bytes(Kind::Datasets, id)?.ok_or_else(|| ApiError::not_found(format!("dataset `{id}`")))
    }

    fn labeled_set(&self, dataset_id: &str, component: Component) -> ApiResult<Arc<LabeledSet>> {
        let key = (dataset_id.to_string(), component);
        if let Some(s) = self.inner.cache.lock().sets.get(&key) {
            return Ok(s.clone());
        }
        let d = self.dataset(dataset_id)?;
        let set = Arc::new(LabeledSet::from_dataset(&d, component)?);
        self.inner.cache.lock().sets.insert(key, set.clone());
        Ok(set)
    }

    /// Resolves the config, runs LOSO (after an optional grid search), trains on
    /// all trials and stores the record under its content hash.
    pub fn train_model(&self, req: &TrainRequest) -> ApiResult<String> {
        let d = self.dataset(&req.dataset_id)?;
        let set = self.labeled_set(&req.dataset_id, req.component)?;
        let splits = loso_splits(&d)?;
        let mut config = ModelConfig::default_for(req.component).with_seed(req.seed.unwrap_or(self.inner.seed));
        if let Some(v) = req.n_hidden_layers {
            config.n_hidden_layers = v;
        }
        if let Some(v) = req.hidden_units {
            config.hidden_units = v;
        }
        if let Some(v) = req.learning_rate {
            config.learning_rate = v;
        }
        if let Some(v) = req.epochs {
            config.epochs = v;
        }
        if let Some(v) = req.batch_size {
            config.batch_size = v;
        }
        config.validate()?;
        let options = LosoOptions { parallel: req.parallel };
        let grid = if req.grid { Some(grid_search(&set, &Grid::full(), &splits, &config, options)?) } else { None };
        if let Some(g) = &grid {
            config = g.best.clone();
        }
        let loso = evaluate_loso_on(&set, &splits, &config, options)?;
        let model = set.fit_all(&config)?;
        let mut record = ModelRecord {
            id: String::new(),
            dataset_id: req.dataset_id.clone(),
            component: req.component,
            config,
            loso,
            grid,
            model,
        };
        record.id = content_id(&json_bytes(&record)?);
        self.store().put_new(Kind::Models, &record.id, &record)?;
        let id = record.id.clone();
        self.inner.cache.lock().models.insert(id.clone(), Arc::new(record));
        Ok(id)
    }

    pub fn model(&self, id: &str) -> ApiResult<Arc<ModelRecord>> {
        if let Some(m) = self.inner.cache.lock().models.get(id) {
            return Ok(m.clone());
        }
        let m: ModelRecord =
            self.store().get(Kind::Models, id)?.ok_or_else(|| ApiError::not_found(format!("model `{id}`")))?;
        let m = Arc::new(m);
        self.inner.cache.lock().models.insert(id.to_string(), m.clone());
        Ok(m)
    }

    pub fn predict(&self, model_id: &str, req: &PredictRequest) -> ApiResult<Prediction> {
        let record = self.model(model_id)?;
        match (&req.features, &req.trial_id) {
            (Some(x), None) => Ok(record.model.predict(x)?),
            (None, Some(t)) => {
                let set = self.labeled_set(&record.dataset_id, record.component)?;
                let i = set.index_of(t).ok_or_else(|| ApiError::not_found(format!("trial `{t}`")))?;
                Ok(record.model.predict(&set.features[i].values)?)
            }
            _ => Err(ApiError::bad_request("provide exactly one of `features` or `trial_id`")),
        }
    }

    pub fn build_space(&self, req: &BuildSpaceRequest) -> ApiResult<String> {
        let record = self.model(&req.model_id)?;
        let set = self.labeled_set(&record.dataset_id, record.component)?;
        let params = req
            .params
            .clone()
            .unwrap_or_else(|| NeighborEmbeddingParams { seed: self.inner.seed, ..Default::default() });
        let space = build_embedding_space(&record.model, &record.id, &set, req.method, req.representation, &params)?;
        let mut rec = SpaceRecord {
            id: String::new(),
            model_id: record.id.clone(),
            dataset_id: record.dataset_id.clone(),
            component: record.component,
            method: req.method,
            representation: req.representation,
            params,
            space,
        };
        rec.id = content_id(&json_bytes(&rec)?);
        self.store().put_new(Kind::Spaces, &rec.id, &rec)?;
        let id = rec.id.clone();
        self.inner.cache.lock().spaces.insert(id.clone(), Arc::new(rec));
        Ok(id)
    }

    pub fn space(&self, id: &str) -> ApiResult<Arc<SpaceRecord>> {
        if let Some(s) = self.inner.cache.lock().spaces.get(id) {
            return Ok(s.clone());
        }
        let s: SpaceRecord =
            self.store().get(Kind::Spaces, id)?.ok_or_else(|| ApiError::not_found(format!("space `{id}`")))?;
        let s = Arc::new(s);
        self.inner.cache.lock().spaces.insert(id.to_string(), s.clone());
        Ok(s)
    }

    /// The model of the LOSO fold that held out `subject_id`.
    fn case_model(&self, record: &ModelRecord, subject_id: &str) -> ApiResult<Arc<TrainedModel>> {
        let key = (record.id.clone(), subject_id.to_string());
        if let Some(m) = self.inner.cache.lock().fold_models.get(&key) {
            return Ok(m.clone());
        }
        let d = self.dataset(&record.dataset_id)?;
        let set = self.labeled_set(&record.dataset_id, record.component)?;
        let m = Arc::new(fold_model(&set, &loso_splits(&d)?, subject_id, &record.config)?);
        self.inner.cache.lock().fold_models.insert(key, m.clone());
        Ok(m)
    }

    pub fn explain(&self, q: &ExplainQuery) -> ApiResult<ExplanationPayload> {
        let k = q.k.unwrap_or(DEFAULT_K);
        if k == 0 {
            return Err(ApiError::bad_request("k must be at least 1"));
        }
        let metric: Metric = q.metric.as_deref().map(str::parse).transpose()?.unwrap_or_default();
        let space: SpaceKind = q.space.as_deref().map(str::parse).transpose()?.unwrap_or_default();
        let attribution = match q.samples {
            None => AttributionMode::Exact,
            Some(n) => AttributionMode::Sampled { n_permutations: n, seed: q.seed.unwrap_or(self.inner.seed) },
        };

        let (rom_id, comp_id, include_examples) = match &q.session {
            Some(sid) => {
                if q.rom_space.is_some() || q.comp_space.is_some() {
                    return Err(ApiError::bad_request("spaces come from the session; do not pass them alongside it"));
                }
                let rec = self.session_record(sid)?;
                let condition = rec
                    .session
                    .condition_of(&q.case)
                    .ok_or_else(|| ApiError::not_found(format!("case `{}` in session `{sid}`", q.case)))?;
                (rec.rom_space, rec.comp_space, condition.shows_examples())
            }
            None => match (&q.rom_space, &q.comp_space) {
                (Some(r), Some(c)) => (r.clone(), c.clone(), true),
                _ => return Err(ApiError::bad_request("pass `session`, or both `rom_space` and `comp_space`")),
            },
        };
        let rom_space = self.space(&rom_id)?;
        let comp_space = self.space(&comp_id)?;
        if rom_space.component != Component::Rom || comp_space.component != Component::Comp {
            return Err(ApiError::bad_request("rom_space must be a ROM space and comp_space a COMP space"));
        }
        if rom_space.dataset_id != comp_space.dataset_id {
            return Err(ApiError::bad_request("spaces were built on different datasets"));
        }
        let dataset = self.dataset(&rom_space.dataset_id)?;
        let trial = dataset.trial(&q.case).ok_or_else(|| ApiError::not_found(format!("case `{}`", q.case)))?;
        if k >= dataset.trials.len() {
            return Err(ApiError::bad_request(format!(
                "k must be below the number of samples ({})",
                dataset.trials.len()
            )));
        }

        let rom_model = self.model(&rom_space.model_id)?;
        let comp_model = self.model(&comp_space.model_id)?;
        let rom_set = self.labeled_set(&rom_space.dataset_id, Component::Rom)?;
        let comp_set = self.labeled_set(&comp_space.dataset_id, Component::Comp)?;
        let rom_case = self.case_model(&rom_model, &trial.subject_id)?;
        let comp_case = self.case_model(&comp_model, &trial.subject_id)?;
        let rom = ComponentInputs {
            model_id: &rom_model.id,
            set: &rom_set,
            space_model: &rom_model.model,
            space: &rom_space.space,
            loso: &rom_model.loso,
            case_model: &rom_case,
        };
        let comp = ComponentInputs {
            model_id: &comp_model.id,
            set: &comp_set,
            space_model: &comp_model.model,
            space: &comp_space.space,
            loso: &comp_model.loso,
            case_model: &comp_case,
        };
        let options = ExplainOptions { k, metric, space, include_examples, attribution };
        let payload = explain_case(&dataset, &q.case, &rom, &comp, &options)?;
        if let Some(ex) = &payload.examples {
            if !check_partition(ex) {
                return Err(ApiError::internal("neighbor sets do not partition the neighbor lists"));
            }
        }
        Ok(payload)
    }

    pub fn create_sessions(&self, req: &CreateSessions) -> ApiResult<Vec<SessionView>> {
        let participants: Vec<String> = match (&req.participant_id, req.participants.is_empty()) {
            (Some(p), true) => vec![p.clone()],
            (None, false) => req.participants.clone(),
            _ => return Err(ApiError::bad_request("provide exactly one of `participant_id` or `participants`")),
        };
        let config = req.config.clone().unwrap_or_default();
        let rom_space = self.space(&req.rom_space)?;
        let comp_space = self.space(&req.comp_space)?;
        if rom_space.component != Component::Rom || comp_space.component != Component::Comp {
            return Err(ApiError::bad_request("rom_space must be a ROM space and comp_space a COMP space"));
        }
        if rom_space.dataset_id != comp_space.dataset_id {
            return Err(ApiError::bad_request("spaces were built on different datasets"));
        }
        let sampling = match config.case_component {
            Component::Rom => self.model(&rom_space.model_id)?,
            Component::Comp => self.model(&comp_space.model_id)?,
        };
        let sessions = create_batch(&participants, &sampling.loso, req.seed.unwrap_or(self.inner.seed), &config)?;
        let mut views = Vec::with_capacity(sessions.len());
        for mut session in sessions {
            session.session_id = ulid::Ulid::new().to_string();
            let record = SessionRecord {
                session,
                dataset_id: rom_space.dataset_id.clone(),
                rom_space: rom_space.id.clone(),
                comp_space: comp_space.id.clone(),
            };
            self.store().put(Kind::Sessions, &record.session.session_id, &record)?;
            views.push(view(&record));
        }
        Ok(views)
    }

    fn session_record(&self, id: &str) -> ApiResult<SessionRecord> {
        self.store().get(Kind::Sessions, id)?.ok_or_else(|| ApiError::not_found(format!("session `{id}`")))
    }

    pub fn session_view(&self, id: &str) -> ApiResult<SessionView> {
        Ok(view(&self.session_record(id)?))
    }

    pub fn record_assessment(&self, session_id: &str, input: AssessmentInput) -> ApiResult<SessionView> {
        if !self.store().exists(Kind::Sessions, session_id) {
            return Err(ApiError::not_found(format!("session `{session_id}`")));
        }
        self.store().update(Kind::Sessions, session_id, |rec: &mut SessionRecord| -> ApiResult<SessionView> {
            rec.session.record_assessment(Assessment {
                session_id: session_id.to_string(),
                case_id: input.case_id,
                component: input.component,
                phase: input.phase,
                label: input.label,
                t_video_start: input.t_video_start,
                t_submit: input.t_submit,
            })?;
            Ok(view(rec))
        })
    }

    fn truth_for(&self, rec: &SessionRecord) -> ApiResult<TruthTable> {
        let rom = self.model(&self.space(&rec.rom_space)?.model_id)?;
        let comp = self.model(&self.space(&rec.comp_space)?.model_id)?;
        Ok(TruthTable::from_loso([&rom.loso, &comp.loso]))
    }

    pub fn session_events(&self, id: &str) -> ApiResult<String> {
        let rec = self.session_record(id)?;
        Ok(export_events(std::slice::from_ref(&rec.session), &self.truth_for(&rec)?)?)
    }

    pub fn session_report(&self, id: &str) -> ApiResult<SessionReport> {
        let rec = self.session_record(id)?;
        let missing = rec.session.missing();
        if !missing.is_empty() {
            return Err(ApiError::conflict(format!(
                "session `{id}` is incomplete: {} assessments missing",
                missing.len()
            )));
        }
        let truth = self.truth_for(&rec)?;
        let events = rehabxai_core::study::parse_events(&export_events(std::slice::from_ref(&rec.session), &truth)?)?;
        let report = analyze_events(&events)?;
        let performance = compute_performance(&rec.session, &truth)?;
        let text = rehabxai_core::study::render_report(&report);
        Ok(SessionReport { session_id: id.to_string(), report, performance, text })
    }

    pub fn job(&self, id: &str) -> ApiResult<JobRecord> {
        self.store().get(Kind::Jobs, id)?.ok_or_else(|| ApiError::not_found(format!("job `{id}`")))
    }

    fn set_job(&self, id: &str, state: JobState, result: Option<String>, diagnostics: Option<String>) {
        let r: ApiResult<()> = self.store().update(Kind::Jobs, id, |j: &mut JobRecord| {
            if j.advance(state) {
                j.result = result;
                j.diagnostics = diagnostics;
            }
            Ok(())
        });
        if let Err(e) = r {
            tracing::error!(job = id, "failed to update job record: {}", e.message);
        }
    }

    /// Queues `work` on the bounded worker pool and returns the job id at once.
    pub fn spawn_job<F>(&self, kind: JobKind, work: F) -> ApiResult<String>
    where
        F: FnOnce(&AppState) -> ApiResult<String> + Send + 'static,
    {
        let id = ulid::Ulid::new().to_string();
        self.store().put(Kind::Jobs, &id, &JobRecord::queued(id.clone(), kind))?;
        let state = self.clone();
        let job_id = id.clone();
        tokio::spawn(async move {
            let _permit = state.inner.jobs.acquire().await.expect("job semaphore is never closed");
            state.set_job(&job_id, JobState::Running, None, None);
            let worker = state.clone();
            match tokio::task::spawn_blocking(move || work(&worker)).await {
                Ok(Ok(result)) => state.set_job(&job_id, JobState::Done, Some(result), None),
                Ok(Err(e)) => state.set_job(&job_id, JobState::Failed, None, Some(e.message)),
                Err(e) => state.set_job(&job_id, JobState::Failed, None, Some(format!("job panicked: {e}"))),
            }
        });
        Ok(id)
    }
}
