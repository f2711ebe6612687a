//! Joint-loss optimization, fold training and cross-validation.

mod adam;
mod checkpoint;
mod config;
mod loss;
mod metrics;
mod trainer;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{Checkpoint, CHECKPOINT_SCHEMA_VERSION};
pub use config::{lr_at, AdamConfig, InfomaxForm, LossKind, TrainConfig};
pub use loss::{
    bce, infomax_loss, joint_loss, loss_and_gradients, loss_value, objective_on_tape, LossParts,
    Objective, PROB_EPS,
};
pub use metrics::{f_score, mean_std, threshold_predictions};
pub use trainer::{
    cross_validate, evaluate, train_fold, CrossValidation, CvReport, EpochRecord, Evaluation,
    TrainHistory, TrainedFold,
};

use thiserror::Error;

use crate::discriminator::NoNegativeCandidate;
use crate::graph_data::GraphError;
use crate::model::ModelError;
use crate::numeric::NumericError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    NoNegative(#[from] NoNegativeCandidate),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("training diverged in epoch {epoch}: {reason}")]
    Diverged {
        epoch: usize,
        reason: String,
        history: Box<TrainHistory>,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported checkpoint schema version {found} (supported: {supported})")]
    UnsupportedVersion { found: u64, supported: u64 },
}

impl From<NumericError> for TrainError {
    fn from(e: NumericError) -> Self {
        TrainError::Model(e.into())
    }
}
