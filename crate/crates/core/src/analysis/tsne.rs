//! Exact t-SNE with the usual early exaggeration, momentum and gains schedule.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::numeric::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// Iteration at which momentum switches to `final_momentum`.
    pub momentum_switch: usize,
    pub min_gain: f64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            min_gain: 0.01,
        }
    }
}

impl TsneConfig {
    /// Largest admissible perplexity is `(n - 1) / 3`, exclusive.
    pub fn check(&self, n: usize) -> Result<(), AnalysisError> {
        if n < 4 {
            return Err(AnalysisError::TooFewPoints {
                found: n,
                needed: 4,
            });
        }
        let max = (n as f64 - 1.0) / 3.0;
        if !(self.perplexity > 0.0 && self.perplexity < max) {
            return Err(AnalysisError::Perplexity {
                perplexity: self.perplexity,
                points: n,
                max,
            });
        }
        if !(self.learning_rate > 0.0 && self.exaggeration >= 1.0 && self.min_gain > 0.0) {
            return Err(AnalysisError::Config(
                "t-SNE needs a positive learning rate and gain floor and exaggeration >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneResult {
    /// S×2 coordinates.
    pub coords: Matrix,
    /// KL(P || Q) after every iteration, with the unexaggerated P.
    pub kl: Vec<f64>,
}

fn squared_distances(x: &Matrix) -> Vec<f64> {
    let n = x.rows();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Row `i` of the conditional affinities, with the Gaussian precision found by
/// bisection so the row entropy matches `ln(perplexity)`.
fn conditional_row(dist: &[f64], i: usize, target_entropy: f64, out: &mut [f64]) {
    let n = dist.len();
    let (mut beta, mut lo, mut hi) = (1.0f64, 0.0f64, f64::INFINITY);
    // Subtracting the nearest-neighbor distance keeps exp() away from underflow.
    let d_min = (0..n)
        .filter(|&j| j != i)
        .map(|j| dist[j])
        .fold(f64::INFINITY, f64::min);
    for _ in 0..200 {
        let mut sum = 0.0;
        let mut weighted = 0.0;
        for j in 0..n {
            out[j] = if j == i {
                0.0
            } else {
                (-(dist[j] - d_min) * beta).exp()
            };
            sum += out[j];
            weighted += out[j] * (dist[j] - d_min);
        }
        let entropy = sum.ln() + beta * weighted / sum;
        out.iter_mut().for_each(|v| *v /= sum);
        let diff = entropy - target_entropy;
        if diff.abs() < 1e-10 {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() {
                (beta + hi) / 2.0
            } else {
                beta * 2.0
            };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
}

/// Symmetrized joint affinities `P`, row-major S×S.
pub fn joint_affinities(x: &Matrix, perplexity: f64) -> Vec<f64> {
    let n = x.rows();
    let d = squared_distances(x);
    let target = perplexity.ln();
    let mut cond = vec![0.0; n * n];
    for i in 0..n {
        conditional_row(
            &d[i * n..(i + 1) * n],
            i,
            target,
            &mut cond[i * n..(i + 1) * n],
        );
    }
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }
    p
}

/// Embeds the rows of `points` in two dimensions.
pub fn tsne(
    points: &Matrix,
    cfg: &TsneConfig,
    rng: &mut impl Rng,
) -> Result<TsneResult, AnalysisError> {
    let n = points.rows();
    cfg.check(n)?;
    if !points.is_finite() {
        return Err(AnalysisError::NonFinite("t-SNE input".into()));
    }
    let p = joint_affinities(points, cfg.perplexity);

    let init = Normal::new(0.0, 1e-2).expect("valid sd");
    let mut y: Vec<f64> = (0..2 * n).map(|_| init.sample(rng)).collect();
    let mut update = vec![0.0; 2 * n];
    let mut gains = vec![1.0f64; 2 * n];
    let mut grad = vec![0.0; 2 * n];
    let mut num = vec![0.0; n * n];
    let mut kl = Vec::with_capacity(cfg.iterations);

    for iter in 0..cfg.iterations {
        let exaggeration = if iter < cfg.exaggeration_iters {
            cfg.exaggeration
        } else {
            1.0
        };
        let momentum = if iter < cfg.momentum_switch {
            cfg.initial_momentum
        } else {
            cfg.final_momentum
        };

        let mut z = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = y[2 * i] - y[2 * j];
                let dy = y[2 * i + 1] - y[2 * j + 1];
                let v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = v;
                num[j * n + i] = v;
                z += 2.0 * v;
            }
        }

        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = num[i * n + j] / z;
                let w = 4.0 * (exaggeration * p[i * n + j] - q) * num[i * n + j];
                grad[2 * i] += w * (y[2 * i] - y[2 * j]);
                grad[2 * i + 1] += w * (y[2 * i + 1] - y[2 * j + 1]);
            }
        }

        for k in 0..2 * n {
            gains[k] = if (grad[k] > 0.0) != (update[k] > 0.0) {
                gains[k] + 0.2
            } else {
                gains[k] * 0.8
            }
            .max(cfg.min_gain);
            update[k] = momentum * update[k] - cfg.learning_rate * gains[k] * grad[k];
            y[k] += update[k];
        }
        for axis in 0..2 {
            let mean = (0..n).map(|i| y[2 * i + axis]).sum::<f64>() / n as f64;
            (0..n).for_each(|i| y[2 * i + axis] -= mean);
        }

        kl.push(kl_divergence(&p, &y, n));
    }

    let coords = Matrix::new(n, 2, y).expect("2n values");
    if !coords.is_finite() {
        return Err(AnalysisError::NonFinite("t-SNE output".into()));
    }
    Ok(TsneResult { coords, kl })
}

fn kl_divergence(p: &[f64], y: &[f64], n: usize) -> f64 {
    let mut z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dx = y[2 * i] - y[2 * j];
                let dy = y[2 * i + 1] - y[2 * j + 1];
                z += 1.0 / (1.0 + dx * dx + dy * dy);
            }
        }
    }
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dx = y[2 * i] - y[2 * j];
                let dy = y[2 * i + 1] - y[2 * j + 1];
                let q = (1.0 / (1.0 + dx * dx + dy * dy) / z).max(1e-12);
                kl += p[i * n + j] * (p[i * n + j] / q).ln();
            }
        }
    }
    kl
}
