use serde::{Deserialize, Serialize};

use super::loso::{evaluate_loso_on, LabeledSet, LosoOptions};
use super::network::ModelConfig;
use crate::dataset::LosoSplit;
use crate::error::{Error, Result};

/// Hyperparameter axes; duplicates are dropped, first occurrence wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub layers: Vec<usize>,
    pub units: Vec<usize>,
    pub learning_rates: Vec<f64>,
}

fn dedup<T: PartialEq + Copy>(values: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(values.len());
    for &v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

impl Grid {
    pub fn new(layers: &[usize], units: &[usize], learning_rates: &[f64]) -> Self {
        Self { layers: dedup(layers), units: dedup(units), learning_rates: dedup(learning_rates) }
    }

    /// 1–3 layers × {32, 64, 128, 256, 512} units × 4 learning rates.
    pub fn full() -> Self {
        Self::new(&ModelConfig::LAYER_GRID, &ModelConfig::UNIT_GRID, &ModelConfig::LEARNING_RATE_GRID)
    }

    pub fn single(config: &ModelConfig) -> Self {
        Self::new(&[config.n_hidden_layers], &[config.hidden_units], &[config.learning_rate])
    }

    pub fn len(&self) -> usize {
        self.layers.len() * self.units.len() * self.learning_rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every cell exactly once, layers outermost.
    pub fn configs(&self, base: &ModelConfig) -> Vec<ModelConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &n_hidden_layers in &self.layers {
            for &hidden_units in &self.units {
                for &learning_rate in &self.learning_rates {
                    out.push(ModelConfig { n_hidden_layers, hidden_units, learning_rate, ..base.clone() });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n_hidden_layers: usize,
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub parameters: usize,
    pub f1: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: ModelConfig,
    pub best_f1: f64,
    pub table: Vec<GridCell>,
}

/// Scores every cell by pooled LOSO F1 over `splits`. Ties go to fewer
/// parameters, then the lower learning rate. Failed cells are recorded, not fatal.
pub fn grid_search(
    set: &LabeledSet,
    grid: &Grid,
    splits: &[LosoSplit],
    base: &ModelConfig,
    options: LosoOptions,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::Config("grid has no cells".into()));
    }
    let input_dim = set.input_dim();
    let mut table = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, usize, ModelConfig)> = None;

    for config in grid.configs(base) {
        let parameters = config.parameter_count(input_dim);
        let outcome = evaluate_loso_on(set, splits, &config, options);
        let (f1, error) = match outcome {
            Ok(report) => (Some(report.f1), None),
            Err(e) => (None, Some(e.to_string())),
        };
        table.push(GridCell {
            n_hidden_layers: config.n_hidden_layers,
            hidden_units: config.hidden_units,
            learning_rate: config.learning_rate,
            parameters,
            f1,
            error,
        });
        if let Some(score) = f1 {
            let better = match &best {
                None => true,
                Some((bs, bp, bc)) => {
                    score > *bs
                        || (score == *bs
                            && (parameters < *bp || (parameters == *bp && config.learning_rate < bc.learning_rate)))
                }
            };
            if better {
                best = Some((score, parameters, config));
            }
        }
    }

    let (best_f1, _, best) = best.ok_or_else(|| Error::Insufficient("every grid cell failed to train".into()))?;
    Ok(GridSearchResult { best, best_f1, table })
}
