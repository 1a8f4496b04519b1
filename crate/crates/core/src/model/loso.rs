use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::Confusion;
use super::network::{init_model, ModelConfig, TrainedModel};
use super::train::train_samples;
use crate::dataset::{loso_splits, Component, Dataset, Label, LosoSplit};
use crate::error::{Error, Result};
use crate::kinematics::{FeatureExtractor, FeatureSchema, FeatureVector};

/// Feature vectors and ground-truth labels for one component, in dataset trial order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub component: Component,
    pub trial_ids: Vec<String>,
    pub subject_ids: Vec<String>,
    pub features: Vec<FeatureVector>,
    pub labels: Vec<Label>,
}

impl LabeledSet {
    pub fn from_dataset(dataset: &Dataset, component: Component) -> Result<Self> {
        let extractor = FeatureExtractor::new(dataset)?;
        let features = extractor.extract_all(dataset, component)?;
        let truth = dataset.ground_truth(component);
        let labels = dataset
            .trials
            .iter()
            .map(|t| {
                truth
                    .get(t.trial_id.as_str())
                    .copied()
                    .ok_or_else(|| Error::validation(format!("trial `{}` has no ground truth", t.trial_id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            component,
            trial_ids: dataset.trials.iter().map(|t| t.trial_id.clone()).collect(),
            subject_ids: dataset.trials.iter().map(|t| t.subject_id.clone()).collect(),
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        FeatureSchema::for_component(self.component).len()
    }

    pub fn schema_hash(&self) -> &str {
        &FeatureSchema::for_component(self.component).schema_hash
    }

    pub fn index_of(&self, trial_id: &str) -> Option<usize> {
        self.trial_ids.iter().position(|t| t == trial_id)
    }

    fn indices_for(&self, subjects: &HashSet<&str>) -> Vec<usize> {
        (0..self.len()).filter(|&i| subjects.contains(self.subject_ids[i].as_str())).collect()
    }

    /// Trains a fresh model on the given sample indices.
    pub fn fit(&self, indices: &[usize], config: &ModelConfig) -> Result<TrainedModel> {
        let samples: Vec<&[f64]> = indices.iter().map(|&i| self.features[i].values.as_slice()).collect();
        let labels: Vec<Label> = indices.iter().map(|&i| self.labels[i]).collect();
        let model = init_model(config, self.input_dim(), self.schema_hash())?;
        train_samples(model, &samples, &labels, config)
    }

    /// Trains on every sample.
    pub fn fit_all(&self, config: &ModelConfig) -> Result<TrainedModel> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.fit(&all, config)
    }

    /// Component-wise mean feature vector.
    pub fn mean_vector(&self) -> Vec<f64> {
        let dim = self.input_dim();
        let mut mean = vec![0.0; dim];
        for f in &self.features {
            for (m, v) in mean.iter_mut().zip(&f.values) {
                *m += v;
            }
        }
        let n = self.len().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LosoOptions {
    /// Train folds on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

/// Held-out prediction for one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPrediction {
    pub trial_id: String,
    pub subject_id: String,
    pub fold: usize,
    pub predicted: Label,
    pub confidence: f64,
    pub ground_truth: Label,
    /// The AI output equals the ground-truth label.
    pub right: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub test_subject: String,
    pub n_test: usize,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosoReport {
    pub component: Component,
    pub config: ModelConfig,
    /// F1 on the impaired class over all pooled held-out predictions.
    pub f1: f64,
    /// Unweighted mean of per-fold F1 (folds without impaired trials score 0).
    pub mean_fold_f1: f64,
    pub accuracy: f64,
    pub folds: Vec<FoldSummary>,
    /// One entry per trial, in dataset order.
    pub predictions: Vec<TrialPrediction>,
}

impl LosoReport {
    pub fn get(&self, trial_id: &str) -> Option<&TrialPrediction> {
        self.predictions.iter().find(|p| p.trial_id == trial_id)
    }

    pub fn right_count(&self) -> usize {
        self.predictions.iter().filter(|p| p.right).count()
    }
}

fn fit_fold(set: &LabeledSet, split: &LosoSplit, fold: usize, config: &ModelConfig) -> Result<TrainedModel> {
    let train_subjects: HashSet<&str> = split.train_subjects.iter().map(String::as_str).collect();
    let train_idx = set.indices_for(&train_subjects);
    if train_idx.is_empty() {
        return Err(Error::Insufficient(format!("fold {fold} has no training trials")));
    }
    set.fit(&train_idx, &config.clone().with_seed(config.seed.wrapping_add(fold as u64)))
}

/// Retrains the model of the fold that held out `subject_id`. Its predictions on
/// that subject equal the ones recorded by `evaluate_loso_on` with the same inputs.
pub fn fold_model(
    set: &LabeledSet,
    splits: &[LosoSplit],
    subject_id: &str,
    config: &ModelConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    let (fold, split) = splits
        .iter()
        .enumerate()
        .find(|(_, s)| s.test_subject == subject_id)
        .ok_or_else(|| Error::NotFound(format!("fold holding out subject `{subject_id}`")))?;
    fit_fold(set, split, fold, config)
}

pub fn evaluate_loso(dataset: &Dataset, config: &ModelConfig, options: LosoOptions) -> Result<LosoReport> {
    let splits = loso_splits(dataset)?;
    let set = LabeledSet::from_dataset(dataset, config.component)?;
    evaluate_loso_on(&set, &splits, config, options)
}

/// Trains one model per split (seed = config.seed + fold index) and pools the
/// held-out predictions.
pub fn evaluate_loso_on(
    set: &LabeledSet,
    splits: &[LosoSplit],
    config: &ModelConfig,
    options: LosoOptions,
) -> Result<LosoReport> {
    config.validate()?;
    if splits.is_empty() {
        return Err(Error::Insufficient("no LOSO splits".into()));
    }

    let run_fold = |(fold, split): (usize, &LosoSplit)| -> Result<Vec<TrialPrediction>> {
        let model = fit_fold(set, split, fold, config)?;
        let test_subjects: HashSet<&str> = std::iter::once(split.test_subject.as_str()).collect();
        let test_idx = set.indices_for(&test_subjects);
        test_idx
            .iter()
            .map(|&i| {
                let p = model.predict(&set.features[i].values)?;
                Ok(TrialPrediction {
                    trial_id: set.trial_ids[i].clone(),
                    subject_id: set.subject_ids[i].clone(),
                    fold,
                    predicted: p.label,
                    confidence: p.confidence,
                    ground_truth: set.labels[i],
                    right: p.label == set.labels[i],
                })
            })
            .collect()
    };

    let per_fold: Vec<Vec<TrialPrediction>> = if options.parallel {
        splits.par_iter().enumerate().map(run_fold).collect::<Result<_>>()?
    } else {
        splits.iter().enumerate().map(run_fold).collect::<Result<_>>()?
    };

    let folds = splits
        .iter()
        .zip(&per_fold)
        .map(|(split, preds)| {
            let (p, t): (Vec<Label>, Vec<Label>) = preds.iter().map(|x| (x.predicted, x.ground_truth)).unzip();
            let f1 = Confusion::tally(&p, &t, Label::Impaired).map(|c| c.f1()).unwrap_or(0.0);
            FoldSummary { test_subject: split.test_subject.clone(), n_test: preds.len(), f1 }
        })
        .collect::<Vec<_>>();

    let mut predictions: Vec<TrialPrediction> = per_fold.into_iter().flatten().collect();
    let order = |id: &str| set.index_of(id).unwrap_or(usize::MAX);
    predictions.sort_by_key(|p| order(&p.trial_id));

    let (p, t): (Vec<Label>, Vec<Label>) = predictions.iter().map(|x| (x.predicted, x.ground_truth)).unzip();
    let pooled = Confusion::tally(&p, &t, Label::Impaired)?;
    let mean_fold_f1 = folds.iter().map(|f| f.f1).sum::<f64>() / folds.len() as f64;

    Ok(LosoReport {
        component: set.component,
        config: config.clone(),
        f1: pooled.f1(),
        mean_fold_f1,
        accuracy: pooled.accuracy(),
        folds,
        predictions,
    })
}
