//! Shapley attributions with a baseline-replacement value function:
//! v(S) = f(x with every group outside S set to the baseline).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::kinematics::FeatureSchema;
use crate::model::TrainedModel;

pub const MAX_EXACT_PLAYERS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AttributionMode {
    Exact,
    Sampled { n_permutations: usize, seed: u64 },
}

/// Per-player Shapley values. `std_errors` is set in sampled mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyValues {
    pub values: Vec<f64>,
    pub std_errors: Option<Vec<f64>>,
    pub value_at_input: f64,
    pub value_at_baseline: f64,
}

fn compose(x: &[f64], baseline: &[f64], groups: &[Vec<usize>], present: impl Fn(usize) -> bool, out: &mut [f64]) {
    out.copy_from_slice(baseline);
    for (g, idx) in groups.iter().enumerate() {
        if present(g) {
            for &i in idx {
                out[i] = x[i];
            }
        }
    }
}

fn check_inputs(x: &[f64], baseline: &[f64], groups: &[Vec<usize>]) -> Result<()> {
    if x.len() != baseline.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), actual: baseline.len() });
    }
    if baseline.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("baseline contains non-finite values"));
    }
    if groups.is_empty() {
        return Err(Error::validation("at least one player is required"));
    }
    let mut seen = vec![false; x.len()];
    for idx in groups {
        for &i in idx {
            if i >= x.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::validation(format!("feature index {i} is out of range or in two groups")));
            }
        }
    }
    Ok(())
}

/// Shapley values of `f` for players = `groups` of input indices. Indices in no
/// group stay at the baseline throughout.
pub fn shapley_values(
    f: impl Fn(&[f64]) -> f64,
    x: &[f64],
    baseline: &[f64],
    groups: &[Vec<usize>],
    mode: AttributionMode,
) -> Result<ShapleyValues> {
    check_inputs(x, baseline, groups)?;
    let n = groups.len();
    let mut z = vec![0.0; x.len()];
    match mode {
        AttributionMode::Exact => {
            if n > MAX_EXACT_PLAYERS {
                return Err(Error::Config(format!(
                    "exact attribution over {n} players exceeds the limit of {MAX_EXACT_PLAYERS}; group features or sample"
                )));
            }
            let coalitions = 1usize << n;
            let mut v = Vec::with_capacity(coalitions);
            for mask in 0..coalitions {
                compose(x, baseline, groups, |g| mask & (1 << g) != 0, &mut z);
                v.push(f(&z));
            }
            // Weight of a coalition of size s not containing the player: s!(n−s−1)!/n!.
            let mut weights = vec![0.0; n];
            for (s, w) in weights.iter_mut().enumerate() {
                let mut binom = 1.0;
                for j in 0..s {
                    binom = binom * (n - 1 - j) as f64 / (j + 1) as f64;
                }
                *w = 1.0 / (n as f64 * binom);
            }
            let mut values = vec![0.0; n];
            for (i, phi) in values.iter_mut().enumerate() {
                let bit = 1 << i;
                for mask in 0..coalitions {
                    if mask & bit == 0 {
                        *phi += weights[mask.count_ones() as usize] * (v[mask | bit] - v[mask]);
                    }
                }
            }
            Ok(ShapleyValues { values, std_errors: None, value_at_input: v[coalitions - 1], value_at_baseline: v[0] })
        }
        AttributionMode::Sampled { n_permutations, seed } => {
            if n_permutations < 2 {
                return Err(Error::Config("sampled attribution needs at least 2 permutations".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (0..n).collect();
            let mut sum = vec![0.0; n];
            let mut sum_sq = vec![0.0; n];
            let mut present = vec![false; n];
            compose(x, baseline, groups, |_| false, &mut z);
            let base = f(&z);
            for _ in 0..n_permutations {
                order.shuffle(&mut rng);
                present.iter_mut().for_each(|p| *p = false);
                z.copy_from_slice(baseline);
                let mut prev = base;
                for &g in &order {
                    present[g] = true;
                    for &i in &groups[g] {
                        z[i] = x[i];
                    }
                    let now = f(&z);
                    let delta = now - prev;
                    sum[g] += delta;
                    sum_sq[g] += delta * delta;
                    prev = now;
                }
            }
            let m = n_permutations as f64;
            let values: Vec<f64> = sum.iter().map(|s| s / m).collect();
            let std_errors = sum_sq
                .iter()
                .zip(&values)
                .map(|(sq, mean)| ((sq / m - mean * mean).max(0.0) * m / (m - 1.0) / m).sqrt())
                .collect();
            compose(x, baseline, groups, |_| true, &mut z);
            Ok(ShapleyValues { values, std_errors: Some(std_errors), value_at_input: f(&z), value_at_baseline: base })
        }
    }
}

/// One attribution player: a named set of input indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub indices: Vec<usize>,
}

pub fn per_feature_groups<S: AsRef<str>>(names: &[S]) -> Vec<FeatureGroup> {
    names.iter().enumerate().map(|(i, n)| FeatureGroup { name: n.as_ref().to_string(), indices: vec![i] }).collect()
}

/// One group per kinematic source channel (11 for ROM, 9 for COMP).
pub fn channel_groups(schema: &FeatureSchema) -> Vec<FeatureGroup> {
    schema.channel_groups().into_iter().map(|(name, indices)| FeatureGroup { name, indices }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAttribution {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub std_errors: Option<Vec<f64>>,
    pub baseline: Vec<f64>,
    pub mode: AttributionMode,
    /// Class whose probability is explained (the model's prediction at x).
    pub explained_class: Label,
    pub value_at_input: f64,
    pub value_at_baseline: f64,
    pub top_features: Vec<String>,
}

/// Explains the predicted-class probability of `model` at `x`.
pub fn shapley_attribution(
    model: &TrainedModel,
    x: &[f64],
    baseline: &[f64],
    groups: &[FeatureGroup],
    mode: AttributionMode,
) -> Result<FeatureAttribution> {
    let prediction = model.predict(x)?;
    if baseline.len() != model.input_dim {
        return Err(Error::DimensionMismatch { expected: model.input_dim, actual: baseline.len() });
    }
    let class = prediction.label.class_index();
    let idx: Vec<Vec<usize>> = groups.iter().map(|g| g.indices.clone()).collect();
    let f = |z: &[f64]| model.probabilities(z).map(|p| p[class]).unwrap_or(f64::NAN);
    let sv = shapley_values(f, x, baseline, &idx, mode)?;
    let names: Vec<String> = groups.iter().map(|g| g.name.clone()).collect();
    let top_features = top_k_by_magnitude(&names, &sv.values, 3.min(names.len()))?;
    Ok(FeatureAttribution {
        names,
        values: sv.values,
        std_errors: sv.std_errors,
        baseline: baseline.to_vec(),
        mode,
        explained_class: prediction.label,
        value_at_input: sv.value_at_input,
        value_at_baseline: sv.value_at_baseline,
        top_features,
    })
}

fn top_k_by_magnitude(names: &[String], values: &[f64], k: usize) -> Result<Vec<String>> {
    if names.len() < k {
        return Err(Error::Insufficient(format!("top-{k} requested from {} features", names.len())));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    // Stable sort keeps schema order among equal magnitudes.
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    Ok(order.into_iter().take(k).map(|i| names[i].clone()).collect())
}

/// The `k` most influential features by |φ|, ties in schema order.
pub fn top_k_features(attribution: &FeatureAttribution, k: usize) -> Result<Vec<String>> {
    top_k_by_magnitude(&attribution.names, &attribution.values, k)
}
