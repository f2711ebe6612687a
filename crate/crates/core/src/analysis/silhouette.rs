//! Two-class silhouette score.

use super::AnalysisError;
use crate::numeric::Matrix;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Mean over points of `(b - a) / max(a, b)` with Euclidean distances, where
/// `a` is the mean distance to the rest of the point's own class and `b` the
/// mean distance to the other class. Points alone in their class score 0, as
/// do points with `a = b = 0`.
pub fn silhouette(points: &Matrix, labels: &[u8]) -> Result<f64, AnalysisError> {
    let n = points.rows();
    if labels.len() != n {
        return Err(AnalysisError::LengthMismatch {
            points: n,
            labels: labels.len(),
        });
    }
    for class in [0u8, 1] {
        if !labels.contains(&class) {
            return Err(AnalysisError::MissingClass { class });
        }
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(AnalysisError::Config(format!(
            "labels must be 0 or 1, found {bad}"
        )));
    }

    let counts = [
        labels.iter().filter(|&&l| l == 0).count(),
        labels.iter().filter(|&&l| l == 1).count(),
    ];
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i] as usize;
        if counts[own] == 1 {
            continue;
        }
        let mut sums = [0.0, 0.0];
        for j in 0..n {
            if j != i {
                sums[labels[j] as usize] += distance(points.row(i), points.row(j));
            }
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let b = sums[1 - own] / counts[1 - own] as f64;
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}
