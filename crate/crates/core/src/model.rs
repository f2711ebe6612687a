//! The full model: encoder, pooling head, MLP classifier and scoring matrix.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{
    assignment_on_tape, mlp_logit_on_tape, pooled_readout_on_tape, pooled_size, MlpParams, MlpVars,
    PoolParams,
};
use crate::discriminator::init_scoring_matrix;
use crate::encoder::{encode_on_tape, propagation_matrix, EncoderParams, EncoderVars, SelfLoops};
use crate::graph_data::BrainGraph;
use crate::numeric::{Gradients, Matrix, NumericError, Tape, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("node {node} has non-positive degree {degree} in the propagation operator")]
    NonPositiveDegree { node: usize, degree: f64 },
}

/// Noise half-width around the identity for the initial scoring matrix.
const SCORING_INIT_NOISE: f64 = 0.01;

/// All learnable tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub encoder: EncoderParams,
    pub pool: PoolParams,
    pub mlp: MlpParams,
    /// Bilinear discriminator matrix `M` (F×F).
    pub scoring: Matrix,
}

impl ModelParams {
    pub fn init(
        in_dim: usize,
        widths: &[usize],
        n_rois: usize,
        pooling_ratio: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, ModelError> {
        let encoder = EncoderParams::init(in_dim, widths, rng)?;
        let width = widths[0];
        let pool = PoolParams::init(width, pooled_size(n_rois, pooling_ratio), rng);
        let mlp = MlpParams::init(width, width, rng);
        let scoring = init_scoring_matrix(width, SCORING_INIT_NOISE, rng);
        Ok(ModelParams {
            encoder,
            pool,
            mlp,
            scoring,
        })
    }

    /// Embedding width `F`.
    pub fn width(&self) -> usize {
        self.encoder.layers.first().map_or(0, Matrix::cols)
    }

    pub fn validate(&self, in_dim: usize) -> Result<(), ModelError> {
        let f = self.encoder.validate(in_dim)?;
        let bad = |what: &str, m: &Matrix| {
            ModelError::Shape(format!(
                "{what} has shape {}x{} for width {f}",
                m.rows(),
                m.cols()
            ))
        };
        if self.pool.weight.rows() != f || self.pool.weight.cols() == 0 {
            return Err(bad("pool weight", &self.pool.weight));
        }
        let hidden = self.mlp.w1.cols();
        if self.mlp.w1.rows() != f {
            return Err(bad("mlp w1", &self.mlp.w1));
        }
        if self.mlp.b1.shape() != (1, hidden) {
            return Err(bad("mlp b1", &self.mlp.b1));
        }
        if self.mlp.w2.shape() != (hidden, 1) {
            return Err(bad("mlp w2", &self.mlp.w2));
        }
        if self.mlp.b2.shape() != (1, 1) {
            return Err(bad("mlp b2", &self.mlp.b2));
        }
        if self.scoring.shape() != (f, f) {
            return Err(bad("scoring matrix", &self.scoring));
        }
        if self.tensors().iter().any(|m| !m.is_finite()) {
            return Err(ModelError::Shape(
                "parameters contain non-finite values".into(),
            ));
        }
        Ok(())
    }

    /// Every tensor, in a fixed order shared with [`ModelParams::tensors_mut`].
    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut out: Vec<&Matrix> = self.encoder.layers.iter().collect();
        out.extend(self.encoder.skip.as_ref());
        out.extend([
            &self.pool.weight,
            &self.mlp.w1,
            &self.mlp.b1,
            &self.mlp.w2,
            &self.mlp.b2,
            &self.scoring,
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = self.encoder.layers.iter_mut().collect();
        out.extend(self.encoder.skip.as_mut());
        out.extend([
            &mut self.pool.weight,
            &mut self.mlp.w1,
            &mut self.mlp.b1,
            &mut self.mlp.w2,
            &mut self.mlp.b2,
            &mut self.scoring,
        ]);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|m| m.len()).sum()
    }
}

/// A graph with its propagation operator computed once.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub features: Matrix,
    pub adjacency: Matrix,
    pub propagation: Matrix,
    pub label: u8,
}

impl PreparedGraph {
    pub fn new(graph: &BrainGraph, self_loops: SelfLoops) -> Result<Self, ModelError> {
        Ok(PreparedGraph {
            features: graph.features().clone(),
            adjacency: graph.adjacency().clone(),
            propagation: propagation_matrix(graph.adjacency(), self_loops)?,
            label: graph.label(),
        })
    }
}

/// Tape handles for every parameter, in [`ModelParams::tensors`] order.
#[derive(Debug, Clone)]
pub struct ParamVars {
    pub encoder: EncoderVars,
    pub pool: Var,
    pub mlp: MlpVars,
    pub scoring: Var,
}

impl ParamVars {
    pub fn record(tape: &mut Tape, params: &ModelParams) -> Self {
        ParamVars {
            encoder: EncoderVars::record(tape, &params.encoder),
            pool: tape.param(params.pool.weight.clone()),
            mlp: MlpVars::record(tape, &params.mlp),
            scoring: tape.param(params.scoring.clone()),
        }
    }

    /// Rebuilds the variables from a slice in [`ModelParams::tensors`] order;
    /// `params` supplies the layer count and whether a skip projection exists.
    pub fn from_slice(vars: &[Var], params: &ModelParams) -> Result<Self, ModelError> {
        let n_layers = params.encoder.layers.len();
        let n_skip = usize::from(params.encoder.skip.is_some());
        if vars.len() != n_layers + n_skip + 6 {
            return Err(ModelError::Shape(format!(
                "expected {} parameter variables, got {}",
                n_layers + n_skip + 6,
                vars.len()
            )));
        }
        let rest = &vars[n_layers + n_skip..];
        Ok(ParamVars {
            encoder: EncoderVars {
                layers: vars[..n_layers].to_vec(),
                skip: (n_skip == 1).then(|| vars[n_layers]),
            },
            pool: rest[0],
            mlp: MlpVars {
                w1: rest[1],
                b1: rest[2],
                w2: rest[3],
                b2: rest[4],
            },
            scoring: rest[5],
        })
    }

    fn vars(&self) -> Vec<Var> {
        let mut out = self.encoder.layers.clone();
        out.extend(self.encoder.skip);
        out.extend([
            self.pool,
            self.mlp.w1,
            self.mlp.b1,
            self.mlp.w2,
            self.mlp.b2,
            self.scoring,
        ]);
        out
    }

    /// Gradients in [`ModelParams::tensors`] order; parameters that did not
    /// influence the root get zeros.
    pub fn gradients(&self, tape: &Tape, grads: &Gradients) -> Vec<Matrix> {
        self.vars()
            .into_iter()
            .map(|v| grads.get_or_zeros(v, tape.value(v)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GraphVars {
    pub x: Var,
    pub prop: Var,
}

impl GraphVars {
    pub fn record(tape: &mut Tape, g: &PreparedGraph) -> Self {
        GraphVars {
            x: tape.constant(g.features.clone()),
            prop: tape.constant(g.propagation.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Forward {
    /// Last-layer node embeddings (N×F).
    pub embeddings: Var,
    /// Soft assignment (N×Q).
    pub assignment: Var,
    /// Readout vector (1×F).
    pub readout: Var,
    /// Classifier logit (1×1).
    pub logit: Var,
}

pub fn forward_on_tape(
    tape: &mut Tape,
    params: &ParamVars,
    g: GraphVars,
) -> Result<Forward, ModelError> {
    let embeddings = encode_on_tape(tape, g.x, g.prop, &params.encoder)?;
    let assignment = assignment_on_tape(tape, embeddings, g.prop, params.pool)?;
    let readout = pooled_readout_on_tape(tape, embeddings, assignment)?;
    let logit = mlp_logit_on_tape(tape, readout, &params.mlp)?;
    Ok(Forward {
        embeddings,
        assignment,
        readout,
        logit,
    })
}

/// Inference outputs for one graph.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub embeddings: Matrix,
    pub assignment: Matrix,
    pub readout: Vec<f64>,
    pub probability: f64,
}

pub fn predict(params: &ModelParams, graph: &PreparedGraph) -> Result<Prediction, ModelError> {
    let mut tape = Tape::new();
    let vars = ParamVars::record(&mut tape, params);
    let gv = GraphVars::record(&mut tape, graph);
    let fwd = forward_on_tape(&mut tape, &vars, gv)?;
    Ok(Prediction {
        embeddings: tape.value(fwd.embeddings).clone(),
        assignment: tape.value(fwd.assignment).clone(),
        readout: tape.value(fwd.readout).as_slice().to_vec(),
        probability: crate::numeric::sigmoid_scalar(tape.scalar(fwd.logit)?),
    })
}
