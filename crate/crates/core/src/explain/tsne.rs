//! Exact (O(n²) per iteration) stochastic neighbor embedding into 2D.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeighborEmbeddingParams {
    /// Effective neighborhood size; clamped to (n − 1) / 3.
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub seed: u64,
}

impl Default for NeighborEmbeddingParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 500,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborEmbedding {
    pub coords: Vec<[f64; 2]>,
    pub perplexity_used: f64,
    /// KL(P ‖ Q) at the final iteration.
    pub kl_divergence: f64,
}

fn squared_distances(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = matrix[i].iter().zip(&matrix[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Row-conditional affinities with per-row precision found by bisection so
/// that each row's entropy equals ln(perplexity).
fn conditional_affinities(dist: &[f64], n: usize, perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut row = vec![0.0; n];
    for i in 0..n {
        let (mut beta, mut lo, mut hi) = (1.0f64, 0.0f64, f64::INFINITY);
        let di = &dist[i * n..(i + 1) * n];
        let min_d = di.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).fold(f64::INFINITY, f64::min);
        for _ in 0..200 {
            let mut sum = 0.0;
            for j in 0..n {
                row[j] = if j == i { 0.0 } else { (-(di[j] - min_d) * beta).exp() };
                sum += row[j];
            }
            let mut weighted = 0.0;
            for j in 0..n {
                weighted += row[j] * (di[j] - min_d);
            }
            let entropy = sum.ln() + beta * weighted / sum;
            let diff = entropy - target;
            if diff.abs() < 1e-10 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        let sum: f64 = row.iter().sum();
        for j in 0..n {
            p[i * n + j] = row[j] / sum;
        }
    }
    p
}

pub fn project_neighbor_embedding(matrix: &[Vec<f64>], params: &NeighborEmbeddingParams) -> Result<NeighborEmbedding> {
    let n = matrix.len();
    if n < MIN_SAMPLES {
        return Err(Error::Insufficient(format!("neighbor embedding needs at least {MIN_SAMPLES} samples, got {n}")));
    }
    let dim = matrix[0].len();
    if matrix.iter().any(|r| r.len() != dim) {
        return Err(Error::validation("rows have differing lengths"));
    }
    if matrix.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::validation("input contains non-finite values"));
    }
    if !(params.perplexity > 1.0 && params.learning_rate > 0.0 && params.iterations > 0) {
        return Err(Error::Config("perplexity must exceed 1; learning rate and iterations must be positive".into()));
    }

    let perplexity = params.perplexity.min((n as f64 - 1.0) / 3.0).max(1.5);
    let dist = squared_distances(matrix);
    let cond = conditional_affinities(&dist, n, perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let init = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [init.sample(&mut rng), init.sample(&mut rng)]).collect();
    let mut velocity = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut num = vec![0.0; n * n];
    let mut grad = vec![[0.0f64; 2]; n];
    let mut kl = f64::NAN;

    for iter in 0..params.iterations {
        let exaggeration = if iter < params.exaggeration_iterations { params.early_exaggeration } else { 1.0 };
        let momentum = if iter < 250 { 0.5 } else { 0.8 };

        let mut sum_num = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let q = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = q;
                num[j * n + i] = q;
                sum_num += 2.0 * q;
            }
        }

        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = num[i * n + j];
                let coeff = (exaggeration * p[i * n + j] - q / sum_num) * q;
                g[0] += coeff * (y[i][0] - y[j][0]);
                g[1] += coeff * (y[i][1] - y[j][1]);
            }
            grad[i] = [4.0 * g[0], 4.0 * g[1]];
        }

        for i in 0..n {
            for a in 0..2 {
                let same_sign = (grad[i][a] > 0.0) == (velocity[i][a] > 0.0);
                gains[i][a] = if same_sign { (gains[i][a] * 0.8).max(0.01) } else { gains[i][a] + 0.2 };
                velocity[i][a] = momentum * velocity[i][a] - params.learning_rate * gains[i][a] * grad[i][a];
                y[i][a] += velocity[i][a];
            }
        }
        let (mx, my) = y.iter().fold((0.0, 0.0), |acc, c| (acc.0 + c[0], acc.1 + c[1]));
        for c in y.iter_mut() {
            c[0] -= mx / n as f64;
            c[1] -= my / n as f64;
        }

        if iter + 1 == params.iterations {
            kl = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let q = (num[i * n + j] / sum_num).max(1e-300);
                        kl += p[i * n + j] * (p[i * n + j] / q).ln();
                    }
                }
            }
        }
    }

    if y.iter().flatten().any(|v| !v.is_finite()) || !kl.is_finite() {
        return Err(Error::NonConvergence(format!(
            "neighbor embedding diverged after {} iterations (final KL = {kl})",
            params.iterations
        )));
    }
    Ok(NeighborEmbedding { coords: y, perplexity_used: perplexity, kl_divergence: kl })
}
