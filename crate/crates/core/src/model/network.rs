use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Component, Label};
use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_hidden_layers: usize,
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub component: Component,
}

impl ModelConfig {
    pub const LAYER_GRID: [usize; 3] = [1, 2, 3];
    pub const UNIT_GRID: [usize; 5] = [32, 64, 128, 256, 512];
    pub const LEARNING_RATE_GRID: [f64; 4] = [0.0001, 0.0005, 0.001, 0.005];

    /// Selected architecture per component: ROM 3×256, COMP 3×64, both at lr 0.005.
    pub fn default_for(component: Component) -> Self {
        let hidden_units = match component {
            Component::Rom => 256,
            Component::Comp => 64,
        };
        Self { n_hidden_layers: 3, hidden_units, learning_rate: 0.005, epochs: 4, batch_size: 1, seed: 0, component }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_hidden_layers < 1 {
            return Err(Error::Config("n_hidden_layers must be at least 1".into()));
        }
        if self.hidden_units < 1 {
            return Err(Error::Config("hidden_units must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("invalid learning rate {}", self.learning_rate)));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn is_on_grid(&self) -> bool {
        Self::LAYER_GRID.contains(&self.n_hidden_layers)
            && Self::UNIT_GRID.contains(&self.hidden_units)
            && Self::LEARNING_RATE_GRID.contains(&self.learning_rate)
    }

    /// Trainable parameter count for a given input dimension.
    pub fn parameter_count(&self, input_dim: usize) -> usize {
        let mut dims = vec![input_dim];
        dims.extend(std::iter::repeat_n(self.hidden_units, self.n_hidden_layers));
        dims.push(NUM_CLASSES);
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Dense layer with row-major `in_dim × out_dim` weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.biases);
        for (i, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.out_dim..(i + 1) * self.out_dim];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += x * w;
            }
        }
    }
}

/// Per-feature standardization fitted on the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl InputScaler {
    pub fn fit(samples: &[&[f64]]) -> Result<Self> {
        let dim = samples.first().map(|s| s.len()).ok_or_else(|| Error::Insufficient("no samples".into()))?;
        let n = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for s in samples {
            for ((acc, v), m) in var.iter_mut().zip(s.iter()).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub trained: bool,
    pub seed: u64,
    pub n_samples: usize,
    /// Mean cross-entropy per epoch.
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub input_dim: usize,
    pub schema_hash: String,
    pub classes: Vec<Label>,
    pub scaler: Option<InputScaler>,
    pub layers: Vec<Layer>,
    pub metadata: TrainingMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    /// Probability of the predicted class.
    pub confidence: f64,
    pub probabilities: Vec<f64>,
    pub logits: Vec<f64>,
    pub first_hidden_activation: Vec<f64>,
}

/// Gradients of the cross-entropy loss, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(model: &TrainedModel) -> Self {
        Self {
            weights: model.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: model.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }
}

pub(crate) struct Trace {
    /// Post-activation output of every layer; the last entry holds the logits.
    pub outputs: Vec<Vec<f64>>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Glorot-uniform weights, zero biases.
pub fn init_model(config: &ModelConfig, input_dim: usize, schema_hash: impl Into<String>) -> Result<TrainedModel> {
    config.validate()?;
    if input_dim < 1 {
        return Err(Error::Config("input_dim must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dims = vec![input_dim];
    dims.extend(std::iter::repeat_n(config.hidden_units, config.n_hidden_layers));
    dims.push(NUM_CLASSES);
    let layers = dims
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Layer {
                in_dim: fan_in,
                out_dim: fan_out,
                weights: (0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)).collect(),
                biases: vec![0.0; fan_out],
            }
        })
        .collect();
    Ok(TrainedModel {
        config: config.clone(),
        input_dim,
        schema_hash: schema_hash.into(),
        classes: Label::ALL.to_vec(),
        scaler: None,
        layers,
        metadata: TrainingMetadata { trained: false, seed: config.seed, n_samples: 0, epoch_losses: Vec::new() },
    })
}

impl TrainedModel {
    pub fn is_trained(&self) -> bool {
        self.metadata.trained
    }

    /// Layer output shapes as (in, out) pairs.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.in_dim, l.out_dim)).collect()
    }

    pub fn first_hidden_dim(&self) -> usize {
        self.layers[0].out_dim
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, actual: x.len() });
        }
        Ok(())
    }

    pub(crate) fn prepare(&self, x: &[f64]) -> Vec<f64> {
        match &self.scaler {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        }
    }

    /// Runs the network on an already-scaled input.
    pub(crate) fn trace(&self, input: &[f64]) -> Trace {
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let prev = if i == 0 { input } else { outputs[i - 1].as_slice() };
            let mut out = Vec::with_capacity(layer.out_dim);
            layer.affine(prev, &mut out);
            if i != last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            outputs.push(out);
        }
        Trace { outputs }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.check_dim(x)?;
        let trace = self.trace(&self.prepare(x));
        let logits = trace.outputs.last().expect("at least one layer").clone();
        let probabilities = softmax(&logits);
        let (best, &confidence) =
            probabilities
                .iter()
                .enumerate()
                .fold((0, &f64::NEG_INFINITY), |acc, (i, p)| if *p > *acc.1 { (i, p) } else { acc });
        Ok(Prediction {
            label: self.classes[best],
            confidence,
            probabilities,
            logits,
            first_hidden_activation: trace.outputs[0].clone(),
        })
    }

    /// Class probabilities only; skips bookkeeping for repeated evaluation.
    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let trace = self.trace(&self.prepare(x));
        Ok(softmax(trace.outputs.last().expect("at least one layer")))
    }

    /// First hidden layer activations (post-ReLU) for a raw input.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let input = self.prepare(x);
        let mut out = Vec::new();
        self.layers[0].affine(&input, &mut out);
        if self.layers.len() > 1 {
            out.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Ok(out)
    }

    /// Cross-entropy of the true label for a raw input.
    pub fn loss(&self, x: &[f64], label: Label) -> Result<f64> {
        self.check_dim(x)?;
        let trace = self.trace(&self.prepare(x));
        let logits = trace.outputs.last().expect("at least one layer");
        Ok(log_sum_exp(logits) - logits[label.class_index()])
    }

    /// Loss and analytic gradients for one raw sample.
    pub fn gradients(&self, x: &[f64], label: Label) -> Result<(f64, Gradients)> {
        self.check_dim(x)?;
        let input = self.prepare(x);
        let mut grads = Gradients::zeros_like(self);
        let loss = self.accumulate_gradients(&input, label.class_index(), &mut grads);
        Ok((loss, grads))
    }

    /// Backpropagates one scaled sample, adding into `grads`. Returns the loss.
    pub(crate) fn accumulate_gradients(&self, input: &[f64], target: usize, grads: &mut Gradients) -> f64 {
        let trace = self.trace(input);
        let logits = trace.outputs.last().expect("at least one layer");
        let loss = log_sum_exp(logits) - logits[target];

        let mut delta = softmax(logits);
        delta[target] -= 1.0;

        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let prev = if li == 0 { input } else { trace.outputs[li - 1].as_slice() };
            let gw = &mut grads.weights[li];
            for (i, &a) in prev.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let row = &mut gw[i * layer.out_dim..(i + 1) * layer.out_dim];
                for (g, &d) in row.iter_mut().zip(&delta) {
                    *g += a * d;
                }
            }
            for (g, &d) in grads.biases[li].iter_mut().zip(&delta) {
                *g += d;
            }
            if li > 0 {
                let mut next = vec![0.0; layer.in_dim];
                for (i, n) in next.iter_mut().enumerate() {
                    if prev[i] <= 0.0 {
                        continue;
                    }
                    let row = &layer.weights[i * layer.out_dim..(i + 1) * layer.out_dim];
                    *n = row.iter().zip(&delta).map(|(w, d)| w * d).sum();
                }
                delta = next;
            }
        }
        loss
    }

    pub(crate) fn apply_step(&mut self, grads: &Gradients, scale: f64) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(grads.weights.iter().zip(&grads.biases)) {
            for (w, g) in layer.weights.iter_mut().zip(gw) {
                *w -= scale * g;
            }
            for (b, g) in layer.biases.iter_mut().zip(gb) {
                *b -= scale * g;
            }
        }
    }

    /// Checks layer shapes against the config and that all weights are finite.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let expected = self.config.n_hidden_layers + 1;
        if self.layers.len() != expected {
            return Err(Error::validation(format!(
                "model has {} layers, config implies {expected}",
                self.layers.len()
            )));
        }
        let mut prev = self.input_dim;
        for (i, l) in self.layers.iter().enumerate() {
            let out = if i + 1 == self.layers.len() { NUM_CLASSES } else { self.config.hidden_units };
            if l.in_dim != prev || l.out_dim != out {
                return Err(Error::validation(format!(
                    "layer {i} is {}×{}, expected {prev}×{out}",
                    l.in_dim, l.out_dim
                )));
            }
            if l.weights.len() != l.in_dim * l.out_dim || l.biases.len() != l.out_dim {
                return Err(Error::validation(format!("layer {i} array sizes do not match its shape")));
            }
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("layer {i} has non-finite parameters")));
            }
            prev = l.out_dim;
        }
        if let Some(s) = &self.scaler {
            if s.mean.len() != self.input_dim || s.std.len() != self.input_dim {
                return Err(Error::validation("input scaler dimension mismatch"));
            }
        }
        if self.classes != Label::ALL {
            return Err(Error::validation("output classes must be [correct, impaired]"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Parse { what: "model".into(), message: e.to_string() })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: TrainedModel =
            serde_json::from_str(text).map_err(|e| Error::Parse { what: "model".into(), message: e.to_string() })?;
        model.validate()?;
        Ok(model)
    }
}

pub fn forward(model: &TrainedModel, x: &[f64]) -> Result<Prediction> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(layers: usize, units: usize) -> ModelConfig {
        ModelConfig { n_hidden_layers: layers, hidden_units: units, ..ModelConfig::default_for(Component::Rom) }
    }

    #[test]
    fn gradients_match_central_differences() {
        for (seed, layers) in [(1u64, 1usize), (2, 2), (3, 3)] {
            let mut m = init_model(&cfg(layers, 6).with_seed(seed), 4, "h").unwrap();
            for (li, l) in m.layers.iter_mut().enumerate() {
                for (j, b) in l.biases.iter_mut().enumerate() {
                    *b = 0.05 * ((li * 7 + j) as f64).sin();
                }
            }
            let x = [0.7, -1.1, 0.4, 1.9];
            let (_, g) = m.gradients(&x, Label::Impaired).unwrap();
            let h = 1e-6;
            let (mut diff, mut norm) = (0.0f64, 0.0f64);
            for li in 0..m.layers.len() {
                for wi in 0..m.layers[li].weights.len() {
                    let orig = m.layers[li].weights[wi];
                    m.layers[li].weights[wi] = orig + h;
                    let up = m.loss(&x, Label::Impaired).unwrap();
                    m.layers[li].weights[wi] = orig - h;
                    let down = m.loss(&x, Label::Impaired).unwrap();
                    m.layers[li].weights[wi] = orig;
                    let numeric = (up - down) / (2.0 * h);
                    diff += (numeric - g.weights[li][wi]).powi(2);
                    norm += numeric.abs() + g.weights[li][wi].abs();
                }
            }
            assert!(diff.sqrt() / norm.max(1e-12) < 1e-6, "seed {seed}");
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_model(&cfg(2, 16), 5, "h").unwrap();
        let b = init_model(&cfg(2, 16), 5, "h").unwrap();
        assert_eq!(a, b);
        let c = init_model(&cfg(2, 16).with_seed(1), 5, "h").unwrap();
        assert_ne!(a.layers, c.layers);
    }

    #[test]
    fn rom_default_shapes() {
        let m = init_model(&ModelConfig::default_for(Component::Rom), 44, "h").unwrap();
        assert_eq!(m.shapes(), vec![(44, 256), (256, 256), (256, 256), (256, 2)]);
        m.validate().unwrap();
    }

    #[test]
    fn init_within_glorot_bounds() {
        let m = init_model(&cfg(1, 8), 4, "h").unwrap();
        let limit = (6.0f64 / 12.0).sqrt();
        assert!(m.layers[0].weights.iter().all(|w| w.abs() <= limit));
        assert!(m.layers.iter().all(|l| l.biases.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn zero_input_gives_equal_logits() {
        let m = init_model(&cfg(3, 32), 7, "h").unwrap();
        let p = m.predict(&[0.0; 7]).unwrap();
        assert_eq!(p.logits[0], p.logits[1]);
        assert_eq!(p.confidence, 0.5);
        assert_eq!(p.probabilities, vec![0.5, 0.5]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = init_model(&cfg(1, 4), 3, "h").unwrap();
        assert!(matches!(m.predict(&[1.0; 4]), Err(Error::DimensionMismatch { expected: 3, actual: 4 })));
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(init_model(&cfg(0, 4), 3, "h").is_err());
        assert!(init_model(&cfg(1, 4), 0, "h").is_err());
        assert!(init_model(&ModelConfig { epochs: 0, ..cfg(1, 4) }, 3, "h").is_err());
    }

    #[test]
    fn hand_set_two_by_two_network() {
        // hidden = relu(I·x), logits = [[1, 0], [0, 2]]ᵀ·hidden + [0.5, 0]
        let mut m = init_model(&cfg(1, 2), 2, "h").unwrap();
        m.layers[0].weights = vec![1.0, 0.0, 0.0, 1.0];
        m.layers[1].weights = vec![1.0, 0.0, 0.0, 2.0];
        m.layers[1].biases = vec![0.5, 0.0];
        let p = m.predict(&[0.3, 0.4]).unwrap();
        // logits = [0.8, 0.8] → even split
        assert!((p.logits[0] - 0.8).abs() < 1e-15 && (p.logits[1] - 0.8).abs() < 1e-15);
        assert!((p.probabilities[0] - 0.5).abs() < 1e-15);
        let p = m.predict(&[1.0, -1.0]).unwrap();
        // hidden = [1, 0] → logits [1.5, 0]; p0 = 1 / (1 + e^-1.5)
        let p0 = 1.0 / (1.0 + (-1.5f64).exp());
        assert!((p.probabilities[0] - p0).abs() < 1e-15);
        assert_eq!(p.label, Label::Correct);
        assert_eq!(p.first_hidden_activation, vec![1.0, 0.0]);
    }

    #[test]
    fn probabilities_normalized() {
        let m = init_model(&cfg(2, 8), 3, "h").unwrap();
        for x in [[100.0, -50.0, 3.0], [1e-3, 2e-3, 0.0], [-7.0, 7.0, 7.0]] {
            let p = m.predict(&x).unwrap();
            assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!((0.5..=1.0).contains(&p.confidence));
        }
    }

    #[test]
    fn json_round_trip_validates_shapes() {
        let m = init_model(&cfg(2, 4), 3, "h").unwrap();
        let text = m.to_json().unwrap();
        assert_eq!(TrainedModel::from_json(&text).unwrap(), m);
        let mut broken = m.clone();
        broken.layers[1].in_dim = 5;
        assert!(TrainedModel::from_json(&broken.to_json().unwrap()).is_err());
    }

    #[test]
    fn parameter_count() {
        assert_eq!(cfg(1, 4).parameter_count(3), 3 * 4 + 4 + 4 * 2 + 2);
    }
}
