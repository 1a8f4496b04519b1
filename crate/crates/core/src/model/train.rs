use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{Gradients, InputScaler, ModelConfig, TrainedModel};
use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::kinematics::FeatureVector;

/// Trains on extracted feature vectors. All vectors must share the model's schema.
pub fn train(
    model: TrainedModel,
    features: &[FeatureVector],
    labels: &[Label],
    config: &ModelConfig,
) -> Result<TrainedModel> {
    for f in features {
        if !model.schema_hash.is_empty() && f.schema_hash != model.schema_hash {
            return Err(Error::validation(format!(
                "feature vector `{}` has schema {}, model expects {}",
                f.trial_id, f.schema_hash, model.schema_hash
            )));
        }
    }
    let samples: Vec<&[f64]> = features.iter().map(|f| f.values.as_slice()).collect();
    train_samples(model, &samples, labels, config)
}

/// Stochastic gradient descent on raw samples. Fits the input scaler on the
/// first call; the sample order is reshuffled every epoch from `config.seed`.
pub fn train_samples(
    mut model: TrainedModel,
    samples: &[&[f64]],
    labels: &[Label],
    config: &ModelConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Insufficient("training needs at least one sample".into()));
    }
    if samples.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: samples.len(), actual: labels.len() });
    }
    for s in samples {
        if s.len() != model.input_dim {
            return Err(Error::DimensionMismatch { expected: model.input_dim, actual: s.len() });
        }
    }

    if model.scaler.is_none() {
        model.scaler = Some(InputScaler::fit(samples)?);
    }
    let prepared: Vec<Vec<f64>> = samples.iter().map(|s| model.prepare(s)).collect();
    let targets: Vec<usize> = labels.iter().map(|l| l.class_index()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut grads = Gradients {
        weights: model.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
        biases: model.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
    };

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            grads.weights.iter_mut().chain(grads.biases.iter_mut()).for_each(|g| g.fill(0.0));
            for &i in batch {
                let loss = model.accumulate_gradients(&prepared[i], targets[i], &mut grads);
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch, sample: batch_no * config.batch_size, loss });
                }
                total += loss;
            }
            model.apply_step(&grads, config.learning_rate / batch.len() as f64);
        }
        epoch_losses.push(total / samples.len() as f64);
    }

    if model.layers.iter().any(|l| l.weights.iter().chain(&l.biases).any(|v| !v.is_finite())) {
        return Err(Error::Diverged { epoch: config.epochs, sample: 0, loss: f64::NAN });
    }
    model.config = config.clone();
    model.metadata.trained = true;
    model.metadata.seed = config.seed;
    model.metadata.n_samples = samples.len();
    model.metadata.epoch_losses.extend(epoch_losses);
    Ok(model)
}
