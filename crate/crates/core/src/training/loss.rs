//! Joint objective: classification BCE + Infomax term + pooling regularizer.

use serde::{Deserialize, Serialize};

use super::{InfomaxForm, TrainConfig, TrainError};
use crate::classifier::link_reg_on_tape;
use crate::discriminator::scores_on_tape;
use crate::encoder::encode_on_tape;
use crate::model::{forward_on_tape, GraphVars, ModelParams, ParamVars, PreparedGraph};
use crate::numeric::{Matrix, Tape, Var};

/// Probabilities are kept this far from 0 and 1 before taking logs.
pub const PROB_EPS: f64 = 1e-7;

/// Per-graph loss components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub l1: f64,
    pub l2: f64,
    pub lreg: f64,
    pub total: f64,
}

impl LossParts {
    pub fn is_finite(&self) -> bool {
        self.l1.is_finite()
            && self.l2.is_finite()
            && self.lreg.is_finite()
            && self.total.is_finite()
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Binary cross-entropy of one prediction.
pub fn bce(p: f64, y: u8) -> f64 {
    let p = clamp_prob(p);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Infomax term from positive-pair and negative-pair discriminator scores.
pub fn infomax_loss(pos_scores: &[f64], neg_scores: &[f64], form: InfomaxForm) -> f64 {
    let mean = |v: &[f64], f: &dyn Fn(f64) -> f64| {
        v.iter().map(|&x| f(clamp_prob(x))).sum::<f64>() / v.len() as f64
    };
    match form {
        InfomaxForm::Standard => {
            -0.5 * (mean(pos_scores, &|d| d.ln()) + mean(neg_scores, &|d| (1.0 - d).ln()))
        }
        InfomaxForm::Literal => {
            0.5 * (mean(pos_scores, &|d| d.ln()) + mean(neg_scores, &|d| 1.0 - d.ln()))
        }
    }
}

/// `L = L1 + lambda_infomax * L2 + lambda_reg * L_reg` for one graph.
pub fn joint_loss(
    p: f64,
    y: u8,
    pos_scores: &[f64],
    neg_scores: &[f64],
    reg: f64,
    cfg: &TrainConfig,
) -> Result<LossParts, TrainError> {
    let inputs_finite = p.is_finite()
        && reg.is_finite()
        && pos_scores.iter().chain(neg_scores).all(|v| v.is_finite());
    if !inputs_finite {
        return Err(TrainError::NonFinite(format!(
            "joint_loss inputs: p={p}, reg={reg}, scores finite={}",
            pos_scores.iter().chain(neg_scores).all(|v| v.is_finite())
        )));
    }
    let l1 = bce(p, y);
    let l2 = if cfg.infomax_active() && !pos_scores.is_empty() && !neg_scores.is_empty() {
        infomax_loss(pos_scores, neg_scores, cfg.infomax_form)
    } else {
        0.0
    };
    let lreg = if cfg.reg_active() { reg } else { 0.0 };
    Ok(LossParts {
        l1,
        l2,
        lreg,
        total: l1 + cfg.lambda_infomax * l2 + cfg.lambda_reg * lreg,
    })
}

pub struct Objective {
    pub total: Var,
    pub parts: LossParts,
}

fn mean_log(tape: &mut Tape, probs: Var, complement: bool) -> Var {
    let x = if complement {
        tape.affine(probs, -1.0, 1.0)
    } else {
        probs
    };
    let clamped = tape.clamp(x, PROB_EPS, 1.0 - PROB_EPS);
    let logs = tape.ln(clamped);
    tape.mean(logs)
}

/// Records the joint loss for `graph` with opposite-class `negatives`.
pub fn objective_on_tape(
    tape: &mut Tape,
    vars: &ParamVars,
    graph: &PreparedGraph,
    negatives: &[&PreparedGraph],
    cfg: &TrainConfig,
) -> Result<Objective, TrainError> {
    let gv = GraphVars::record(tape, graph);
    let fwd = forward_on_tape(tape, vars, gv)?;

    let prob = tape.sigmoid(fwd.logit);
    let l1 = if graph.label == 1 {
        mean_log(tape, prob, false)
    } else {
        mean_log(tape, prob, true)
    };
    let l1 = tape.scale(l1, -1.0);
    let mut total = l1;
    let mut parts = LossParts {
        l1: tape.scalar(l1)?,
        ..LossParts::default()
    };

    if cfg.infomax_active() && !negatives.is_empty() {
        let summary = tape.sigmoid(fwd.readout);
        let pos = scores_on_tape(tape, fwd.embeddings, vars.scoring, summary)?;
        let pos_term = mean_log(tape, pos, false);

        let mut neg_terms = Vec::with_capacity(negatives.len());
        for neg in negatives {
            let nv = GraphVars::record(tape, neg);
            let h_neg = encode_on_tape(tape, nv.x, nv.prop, &vars.encoder)?;
            let scores = scores_on_tape(tape, h_neg, vars.scoring, summary)?;
            neg_terms.push(match cfg.infomax_form {
                InfomaxForm::Standard => mean_log(tape, scores, true),
                InfomaxForm::Literal => {
                    let m = mean_log(tape, scores, false);
                    tape.affine(m, -1.0, 1.0)
                }
            });
        }
        let mut neg_sum = neg_terms[0];
        for &t in &neg_terms[1..] {
            neg_sum = tape.add(neg_sum, t)?;
        }
        let neg_term = tape.scale(neg_sum, 1.0 / negatives.len() as f64);
        let both = tape.add(pos_term, neg_term)?;
        let sign = match cfg.infomax_form {
            InfomaxForm::Standard => -0.5,
            InfomaxForm::Literal => 0.5,
        };
        let l2 = tape.scale(both, sign);
        parts.l2 = tape.scalar(l2)?;
        let weighted = tape.scale(l2, cfg.lambda_infomax);
        total = tape.add(total, weighted)?;
    }

    if cfg.reg_active() {
        let adj = tape.constant(graph.adjacency.clone());
        let lreg = link_reg_on_tape(tape, adj, fwd.assignment)?;
        parts.lreg = tape.scalar(lreg)?;
        let weighted = tape.scale(lreg, cfg.lambda_reg);
        total = tape.add(total, weighted)?;
    }

    parts.total = tape.scalar(total)?;
    if !parts.is_finite() {
        return Err(TrainError::NonFinite(format!("loss components {parts:?}")));
    }
    Ok(Objective { total, parts })
}

/// Loss value and gradients (in [`ModelParams::tensors`] order) for one graph.
pub fn loss_and_gradients(
    params: &ModelParams,
    graph: &PreparedGraph,
    negatives: &[&PreparedGraph],
    cfg: &TrainConfig,
) -> Result<(LossParts, Vec<Matrix>), TrainError> {
    let mut tape = Tape::new();
    let vars = ParamVars::record(&mut tape, params);
    let obj = objective_on_tape(&mut tape, &vars, graph, negatives, cfg)?;
    let grads = tape.backward(obj.total)?;
    Ok((obj.parts, vars.gradients(&tape, &grads)))
}

/// Loss value only.
pub fn loss_value(
    params: &ModelParams,
    graph: &PreparedGraph,
    negatives: &[&PreparedGraph],
    cfg: &TrainConfig,
) -> Result<LossParts, TrainError> {
    let mut tape = Tape::new();
    let vars = ParamVars::record(&mut tape, params);
    Ok(objective_on_tape(&mut tape, &vars, graph, negatives, cfg)?.parts)
}
