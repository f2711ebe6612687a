//! Fold-wise training, evaluation and cross-validation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::loss::loss_and_gradients;
use super::metrics::{f_score, mean_std, threshold_predictions};
use super::{lr_at, TrainConfig, TrainError};
use crate::discriminator::sample_negative_index;
use crate::graph_data::{split_folds, Cohort, FoldSplit, NUM_FEATURES};
use crate::model::{predict, ModelParams, PreparedGraph};
use crate::seed::rng_for;

/// One epoch of training metrics. Loss columns are means over training graphs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub l1: f64,
    pub l2: f64,
    pub lreg: f64,
    pub total: f64,
    pub train_f: f64,
    pub test_f: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serialization cannot fail") + "\n")
            .collect()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone)]
pub struct TrainedFold {
    pub fold: usize,
    pub params: ModelParams,
    pub history: TrainHistory,
}

/// Probabilities and F-score of a model on a set of graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub probabilities: Vec<f64>,
    pub labels: Vec<u8>,
    pub f_score: f64,
}

pub(crate) fn prepare(
    cohort: &Cohort,
    cfg: &TrainConfig,
) -> Result<Vec<PreparedGraph>, TrainError> {
    cohort
        .graphs()
        .iter()
        .map(|g| PreparedGraph::new(g, cfg.self_loops).map_err(TrainError::from))
        .collect()
}

fn evaluate_prepared(
    params: &ModelParams,
    graphs: &[PreparedGraph],
    indices: &[usize],
    threshold: f64,
) -> Result<Evaluation, TrainError> {
    let probabilities = indices
        .iter()
        .map(|&i| predict(params, &graphs[i]).map(|p| p.probability))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<u8> = indices.iter().map(|&i| graphs[i].label).collect();
    let f = f_score(&threshold_predictions(&probabilities, threshold), &labels);
    Ok(Evaluation {
        probabilities,
        labels,
        f_score: f,
    })
}

/// Evaluates `params` on the graphs at `indices` of `cohort`.
pub fn evaluate(
    params: &ModelParams,
    cohort: &Cohort,
    indices: &[usize],
    cfg: &TrainConfig,
) -> Result<Evaluation, TrainError> {
    params.validate(NUM_FEATURES)?;
    let graphs = prepare(cohort, cfg)?;
    evaluate_prepared(params, &graphs, indices, cfg.decision_threshold)
}

/// Trains one model on every fold but `fold` and tracks the held-out F-score.
///
/// Updates are per graph, in an order reshuffled every epoch; each step draws
/// fresh opposite-class negatives from the training graphs.
pub fn train_fold(
    cohort: &Cohort,
    split: &FoldSplit,
    fold: usize,
    cfg: &TrainConfig,
) -> Result<TrainedFold, TrainError> {
    cfg.validate()?;
    if fold >= split.k() {
        return Err(TrainError::Config(format!(
            "fold {fold} out of range for {} folds",
            split.k()
        )));
    }
    let graphs = prepare(cohort, cfg)?;
    let train_idx = split.train_indices(cohort, fold);
    let test_idx = split.test_indices(cohort, fold);
    if train_idx.is_empty() {
        return Err(TrainError::Config(format!(
            "fold {fold} leaves no training graphs"
        )));
    }
    let train_labels: Vec<u8> = train_idx.iter().map(|&i| graphs[i].label).collect();

    let fold_tag = fold as u64;
    let mut init_rng = rng_for(cfg.seed, "init", fold_tag);
    let mut shuffle_rng = rng_for(cfg.seed, "shuffle", fold_tag);
    let mut negative_rng = rng_for(cfg.seed, "negatives", fold_tag);

    let mut params = ModelParams::init(
        NUM_FEATURES,
        &cfg.conv_widths,
        cohort.num_rois(),
        cfg.pooling_ratio,
        &mut init_rng,
    )?;
    let mut adam = AdamState::new(params.tensors());
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_idx.len()).collect();

    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, cfg);
        order.shuffle(&mut shuffle_rng);
        let mut sums = [0.0f64; 4];
        for &pos in &order {
            let graph = &graphs[train_idx[pos]];
            let negatives = if cfg.infomax_active() {
                (0..cfg.negatives_per_graph)
                    .map(|_| {
                        sample_negative_index(&train_labels, graph.label, &mut negative_rng)
                            .map(|k| &graphs[train_idx[k]])
                    })
                    .collect::<Result<Vec<_>, _>>()?
            } else {
                Vec::new()
            };
            let (parts, grads) = match loss_and_gradients(&params, graph, &negatives, cfg) {
                Ok(v) => v,
                Err(TrainError::NonFinite(reason)) => {
                    return Err(TrainError::Diverged {
                        epoch,
                        reason,
                        history: Box::new(history),
                    })
                }
                Err(e) => return Err(e),
            };
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::Diverged {
                    epoch,
                    reason: "non-finite gradient".into(),
                    history: Box::new(history),
                });
            }
            adam_step(&mut params.tensors_mut(), &grads, &mut adam, lr, &cfg.adam);
            for (s, v) in sums
                .iter_mut()
                .zip([parts.l1, parts.l2, parts.lreg, parts.total])
            {
                *s += v;
            }
        }
        let n = order.len() as f64;
        let train_f =
            evaluate_prepared(&params, &graphs, &train_idx, cfg.decision_threshold)?.f_score;
        let test_f = if test_idx.is_empty() {
            0.0
        } else {
            evaluate_prepared(&params, &graphs, &test_idx, cfg.decision_threshold)?.f_score
        };
        log::info!(
            "fold {fold} epoch {epoch}: loss {:.4}, train F {train_f:.3}, test F {test_f:.3}",
            sums[3] / n
        );
        history.records.push(EpochRecord {
            epoch,
            lr,
            l1: sums[0] / n,
            l2: sums[1] / n,
            lreg: sums[2] / n,
            total: sums[3] / n,
            train_f,
            test_f,
        });
    }
    Ok(TrainedFold {
        fold,
        params,
        history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub test_f: Vec<f64>,
    pub train_f: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation across folds.
    pub std: f64,
    pub train_mean: f64,
}

impl CvReport {
    pub fn from_scores(test_f: Vec<f64>, train_f: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&test_f);
        let (train_mean, _) = mean_std(&train_f);
        CvReport {
            test_f,
            train_f,
            mean,
            std,
            train_mean,
        }
    }

    /// Mean train F-score minus mean test F-score.
    pub fn generalization_gap(&self) -> f64 {
        self.train_mean - self.mean
    }
}

#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub split: FoldSplit,
    pub folds: Vec<TrainedFold>,
    pub report: CvReport,
}

/// Subject-level k-fold cross-validation; one model per held-out fold.
pub fn cross_validate(cohort: &Cohort, cfg: &TrainConfig) -> Result<CrossValidation, TrainError> {
    cfg.validate()?;
    let split = split_folds(cohort, cfg.folds, cfg.seed)?;
    let folds = (0..cfg.folds)
        .map(|k| train_fold(cohort, &split, k, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let last = |f: &TrainedFold, pick: fn(&EpochRecord) -> f64| f.history.last().map_or(0.0, pick);
    let report = CvReport::from_scores(
        folds.iter().map(|f| last(f, |r| r.test_f)).collect(),
        folds.iter().map(|f| last(f, |r| r.train_f)).collect(),
    );
    Ok(CrossValidation {
        split,
        folds,
        report,
    })
}
