use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-component PCA fit. Each component's largest-magnitude loading is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub coords: Vec<[f64; 2]>,
    pub mean: Vec<f64>,
    pub components: [Vec<f64>; 2],
    /// Eigenvalues of the sample covariance (n − 1 denominator).
    pub explained_variance: [f64; 2],
    pub explained_variance_ratio: [f64; 2],
    /// All rows identical: coordinates are zero and components are meaningless.
    pub degenerate: bool,
}

impl PcaProjection {
    pub fn project(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), actual: x.len() });
        }
        let mut out = [0.0; 2];
        for (k, comp) in self.components.iter().enumerate() {
            out[k] = x.iter().zip(&self.mean).zip(comp).map(|((v, m), c)| (v - m) * c).sum();
        }
        Ok(out)
    }
}

pub fn project_pca(matrix: &[Vec<f64>]) -> Result<PcaProjection> {
    let n = matrix.len();
    if n < 3 {
        return Err(Error::Insufficient(format!("PCA needs at least 3 rows, got {n}")));
    }
    let d = matrix[0].len();
    if d == 0 {
        return Err(Error::Insufficient("PCA needs at least one column".into()));
    }
    for row in matrix {
        if row.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("PCA input contains non-finite values"));
        }
    }

    let mut mean = vec![0.0; d];
    for row in matrix {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, d, |i, j| matrix[i][j] - mean[j]);
    let total_ss: f64 = centered.iter().map(|v| v * v).sum();
    if total_ss == 0.0 {
        return Ok(PcaProjection {
            coords: vec![[0.0; 2]; n],
            mean,
            components: [vec![0.0; d], vec![0.0; d]],
            explained_variance: [0.0; 2],
            explained_variance_ratio: [0.0; 2],
            degenerate: true,
        });
    }

    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let total_var = cov.trace();
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut components = [vec![0.0; d], vec![0.0; d]];
    let mut explained_variance = [0.0; 2];
    for k in 0..2.min(d) {
        let col = eig.eigenvectors.column(order[k]);
        let mut v: Vec<f64> = col.iter().copied().collect();
        let pivot =
            v.iter().enumerate().fold((0, 0.0f64), |acc, (i, x)| if x.abs() > acc.1.abs() { (i, *x) } else { acc });
        if pivot.1 < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components[k] = v;
        explained_variance[k] = eig.eigenvalues[order[k]].max(0.0);
    }

    let coords = (0..n)
        .map(|i| {
            let row = centered.row(i);
            let mut c = [0.0; 2];
            for k in 0..2 {
                c[k] = row.iter().zip(&components[k]).map(|(a, b)| a * b).sum();
            }
            c
        })
        .collect();

    Ok(PcaProjection {
        coords,
        mean,
        explained_variance_ratio: [explained_variance[0] / total_var, explained_variance[1] / total_var],
        components,
        explained_variance,
        degenerate: false,
    })
}
