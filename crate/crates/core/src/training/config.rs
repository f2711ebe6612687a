use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::encoder::SelfLoops;

/// Form of the Infomax term added to the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfomaxForm {
    /// `-(1/2)[mean log D(h, s) + mean log(1 - D(h', s))]`, minimized.
    #[default]
    Standard,
    /// `(1/2N)[sum log D(h, s) + sum (1 - log D(h', s))]`, added as printed.
    /// Kept for comparison only; minimizing it pushes positive scores down.
    Literal,
}

/// Which objective a model is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Cross-entropy alone.
    L1,
    /// Cross-entropy plus the weighted Infomax and link terms.
    #[default]
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Graph convolution widths: `[F]` or `[F, F]`.
    pub conv_widths: Vec<usize>,
    pub pooling_ratio: f64,
    pub lambda_infomax: f64,
    pub lambda_reg: f64,
    pub lr0: f64,
    pub lr_halve_every: usize,
    pub epochs: usize,
    pub folds: usize,
    pub seed: u64,
    /// `false` trains with the classification (and pooling) losses only.
    pub use_infomax: bool,
    pub infomax_form: InfomaxForm,
    pub negatives_per_graph: usize,
    pub self_loops: SelfLoops,
    pub adam: AdamConfig,
    /// Probability at or above which a graph is predicted positive.
    pub decision_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            conv_widths: vec![8, 8],
            pooling_ratio: 0.5,
            lambda_infomax: 1.0,
            lambda_reg: 0.1,
            lr0: 0.001,
            lr_halve_every: 20,
            epochs: 100,
            folds: 5,
            seed: 0,
            use_infomax: true,
            infomax_form: InfomaxForm::Standard,
            negatives_per_graph: 1,
            self_loops: SelfLoops::AddIdentity,
            adam: AdamConfig::default(),
            decision_threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !matches!(self.conv_widths.len(), 1 | 2) {
            return bad(format!(
                "conv_widths must have 1 or 2 entries, got {:?}",
                self.conv_widths
            ));
        }
        if self.conv_widths.contains(&0)
            || self.conv_widths.iter().any(|&w| w != self.conv_widths[0])
        {
            return bad(format!(
                "conv_widths must be positive and equal, got {:?}",
                self.conv_widths
            ));
        }
        if !(self.pooling_ratio > 0.0 && self.pooling_ratio <= 1.0) {
            return bad(format!(
                "pooling_ratio must be in (0, 1], got {}",
                self.pooling_ratio
            ));
        }
        for (name, v) in [
            ("lambda_infomax", self.lambda_infomax),
            ("lambda_reg", self.lambda_reg),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 must be positive, got {}", self.lr0));
        }
        if self.lr_halve_every == 0 || self.epochs == 0 || self.negatives_per_graph == 0 {
            return bad("lr_halve_every, epochs and negatives_per_graph must be positive".into());
        }
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1)
            || !(0.0..1.0).contains(&a.beta2)
            || a.eps.is_nan()
            || a.eps <= 0.0
        {
            return bad(format!("invalid Adam settings {a:?}"));
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return bad(format!(
                "decision_threshold must be in (0, 1), got {}",
                self.decision_threshold
            ));
        }
        Ok(())
    }

    /// Whether the Infomax term is evaluated at all.
    /// Switches the loss terms on or off; `Joint` keeps the configured weights.
    pub fn with_loss(self, kind: LossKind) -> Self {
        match kind {
            LossKind::L1 => TrainConfig {
                use_infomax: false,
                lambda_reg: 0.0,
                ..self
            },
            LossKind::Joint => TrainConfig {
                use_infomax: true,
                ..self
            },
        }
    }

    pub fn infomax_active(&self) -> bool {
        self.use_infomax && self.lambda_infomax > 0.0
    }

    pub fn reg_active(&self) -> bool {
        self.lambda_reg > 0.0
    }
}

/// Step schedule: `lr0 / 2^floor(epoch / lr_halve_every)`.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    let halvings = (epoch / cfg.lr_halve_every.max(1)).min(1000) as i32;
    cfg.lr0 * 0.5f64.powi(halvings)
}
