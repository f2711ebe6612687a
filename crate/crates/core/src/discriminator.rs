//! Bilinear node/summary scorer and opposite-class negative sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::encode_with_propagation;
use crate::graph_data::BrainGraph;
use crate::model::{predict, ModelError, ModelParams, PreparedGraph};
use crate::numeric::{sigmoid_scalar, Matrix, Tape, Var};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no training graph with label {wanted} to draw a negative from")]
pub struct NoNegativeCandidate {
    pub wanted: u8,
}

/// Summary vector `s = sigmoid(r)`.
pub fn summarize(r: &[f64]) -> Vec<f64> {
    r.iter().map(|&v| sigmoid_scalar(v)).collect()
}

/// `sigmoid(h^T M s)`.
pub fn score(h: &[f64], s: &[f64], m: &Matrix) -> Result<f64, ModelError> {
    if m.shape() != (h.len(), s.len()) {
        return Err(ModelError::Shape(format!(
            "scoring matrix is {}x{} for h of length {} and s of length {}",
            m.rows(),
            m.cols(),
            h.len(),
            s.len()
        )));
    }
    let mut bilinear = 0.0;
    for (i, hi) in h.iter().enumerate() {
        bilinear += hi * m.row(i).iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(sigmoid_scalar(bilinear))
}

/// Scores every row of `h` (N×F) against one summary `s`; returns N values.
pub fn score_nodes(h: &Matrix, s: &[f64], m: &Matrix) -> Result<Vec<f64>, ModelError> {
    (0..h.rows()).map(|i| score(h.row(i), s, m)).collect()
}

/// Identity plus uniform noise in `[-scale, scale]`.
pub fn init_scoring_matrix(width: usize, scale: f64, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(width, width, |i, j| {
        let noise = rng.random_range(-scale..=scale);
        if i == j {
            1.0 + noise
        } else {
            noise
        }
    })
}

/// Uniformly picks a position in `labels` whose label differs from `current`.
pub fn sample_negative_index(
    labels: &[u8],
    current: u8,
    rng: &mut impl Rng,
) -> Result<usize, NoNegativeCandidate> {
    let wanted = 1 - current.min(1);
    let count = labels.iter().filter(|&&l| l == wanted).count();
    if count == 0 {
        return Err(NoNegativeCandidate { wanted });
    }
    let k = rng.random_range(0..count);
    Ok(labels
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l == wanted)
        .nth(k)
        .map(|(i, _)| i)
        .expect("k < count"))
}

/// Draws an opposite-class graph uniformly from `candidates`.
pub fn sample_negative<'a>(
    candidates: &[&'a BrainGraph],
    current: u8,
    rng: &mut impl Rng,
) -> Result<&'a BrainGraph, NoNegativeCandidate> {
    let labels: Vec<u8> = candidates.iter().map(|g| g.label()).collect();
    sample_negative_index(&labels, current, rng).map(|i| candidates[i])
}

/// Mean discriminator scores of one graph's own nodes and of an
/// opposite-class graph's nodes, both against the first graph's summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub positive: f64,
    pub negative: f64,
}

pub fn pair_scores(
    params: &ModelParams,
    graph: &PreparedGraph,
    negative: &PreparedGraph,
) -> Result<PairScores, ModelError> {
    let pred = predict(params, graph)?;
    let s = summarize(&pred.readout);
    let h_neg =
        encode_with_propagation(&negative.features, &negative.propagation, &params.encoder)?;
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    Ok(PairScores {
        positive: mean(score_nodes(&pred.embeddings, &s, &params.scoring)?),
        negative: mean(score_nodes(&h_neg, &s, &params.scoring)?),
    })
}

/// Node scores `sigmoid(H M s^T)` (N×1) for embeddings `h` (N×F) and summary `s` (1×F).
pub fn scores_on_tape(tape: &mut Tape, h: Var, m: Var, s: Var) -> Result<Var, ModelError> {
    let hm = tape.matmul(h, m)?;
    let st = tape.transpose(s);
    let logits = tape.matmul(hm, st)?;
    Ok(tape.sigmoid(logits))
}
