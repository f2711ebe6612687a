//! Correlation adjacency and per-node attribute construction.

use log::warn;

use super::{GraphError, NUM_FEATURES};
use crate::numeric::Matrix;

/// Number of GLM coefficients per node.
pub const NUM_BETAS: usize = 4;

/// Pearson correlation between every pair of rows of `timeseries` (N×T).
///
/// Rows with zero variance get zero off-diagonal entries and a unit diagonal.
pub fn correlation_adjacency(timeseries: &Matrix) -> Result<Matrix, GraphError> {
    let (n, t) = timeseries.shape();
    if t < 2 {
        return Err(GraphError::TooFewTimepoints(t));
    }
    let mut centered = timeseries.clone();
    let mut norms = vec![0.0; n];
    for (i, norm) in norms.iter_mut().enumerate() {
        let row = centered.row_mut(i);
        let mean = row.iter().sum::<f64>() / t as f64;
        row.iter_mut().for_each(|v| *v -= mean);
        let ss: f64 = row.iter().map(|v| v * v).sum();
        let sd = (ss / t as f64).sqrt();
        if sd <= 1e-12 * mean.abs().max(1.0) {
            warn!("ROI {i} has a zero-variance time series; its correlations are set to 0");
            *norm = 0.0;
        } else {
            *norm = ss.sqrt();
        }
    }
    let mut adj = Matrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if norms[i] == 0.0 || norms[j] == 0.0 {
                continue;
            }
            let dot: f64 = centered
                .row(i)
                .iter()
                .zip(centered.row(j))
                .map(|(a, b)| a * b)
                .sum();
            let r = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            adj.set(i, j, r);
            adj.set(j, i, r);
        }
    }
    Ok(adj)
}

/// Node attributes before column normalization, in the column order
/// `[degree, beta1..beta4, mean, std, x, y, z]`.
///
/// Degree is the weighted absolute degree `sum_j |a_ij|` excluding the self-loop.
pub fn raw_node_features(
    timeseries: &Matrix,
    glm_betas: &Matrix,
    centroids: &Matrix,
    adjacency: &Matrix,
) -> Result<Matrix, GraphError> {
    let n = timeseries.rows();
    let check = |what: &'static str, m: &Matrix, cols: usize| {
        if m.shape() != (n, cols) {
            Err(GraphError::InputShape {
                what,
                expected: (n, cols),
                found: m.shape(),
            })
        } else {
            Ok(())
        }
    };
    check("glm_betas", glm_betas, NUM_BETAS)?;
    check("centroids", centroids, 3)?;
    check("adjacency", adjacency, n)?;
    let t = timeseries.cols();
    if t == 0 {
        return Err(GraphError::TooFewTimepoints(0));
    }

    let mut out = Matrix::zeros(n, NUM_FEATURES);
    for i in 0..n {
        let degree: f64 = adjacency
            .row(i)
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, a)| a.abs())
            .sum();
        let row = timeseries.row(i);
        let mean = row.iter().sum::<f64>() / t as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t as f64;

        let dst = out.row_mut(i);
        dst[0] = degree;
        dst[1..5].copy_from_slice(glm_betas.row(i));
        dst[5] = mean;
        dst[6] = var.sqrt();
        dst[7..10].copy_from_slice(centroids.row(i));
    }
    Ok(out)
}

/// Builds the N×10 node-attribute matrix with each column z-scored across nodes.
pub fn build_node_features(
    timeseries: &Matrix,
    glm_betas: &Matrix,
    centroids: &Matrix,
    adjacency: &Matrix,
) -> Result<Matrix, GraphError> {
    let mut raw = raw_node_features(timeseries, glm_betas, centroids, adjacency)?;
    zscore_columns(&mut raw);
    Ok(raw)
}

/// Standardizes every column to mean 0 and population standard deviation 1.
/// Constant columns become all-zero.
pub fn zscore_columns(m: &mut Matrix) {
    let n = m.rows();
    if n == 0 {
        return;
    }
    for j in 0..m.cols() {
        let col = m.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let constant = sd <= 1e-12 * mean.abs().max(1.0);
        for (i, v) in col.iter().enumerate() {
            m.set(i, j, if constant { 0.0 } else { (v - mean) / sd });
        }
    }
}
