//! Mean-pooling graph convolution encoder.
//!
//! The propagation rule is `MP(X, A) = D^-1 (A + I) X Theta` with `D` the row
//! sums of `A + I`. Layer 1 is `H1 = sigmoid(MP(X, A))`; middle layers apply
//! the same rule to the previous output. The last layer of a multi-layer
//! encoder propagates the sum of all earlier layer outputs plus a skip term
//! `P X W`, where `P` is the propagation operator and `W` a learned projection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::ModelError;
use crate::numeric::{Matrix, Tape, Var};

/// How the propagation operator treats the adjacency diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfLoops {
    /// Use `A + I`, which doubles a unit correlation diagonal.
    #[default]
    AddIdentity,
    /// Use `A` as given.
    KeepDiagonal,
}

/// Row-normalized propagation operator `D^-1 A_hat`.
pub fn propagation_matrix(adjacency: &Matrix, self_loops: SelfLoops) -> Result<Matrix, ModelError> {
    let n = adjacency.rows();
    if adjacency.cols() != n {
        return Err(ModelError::Shape(format!(
            "adjacency must be square, got {}x{}",
            n,
            adjacency.cols()
        )));
    }
    let mut p = adjacency.clone();
    if self_loops == SelfLoops::AddIdentity {
        for i in 0..n {
            p.set(i, i, p.get(i, i) + 1.0);
        }
    }
    for i in 0..n {
        let row = p.row_mut(i);
        let degree: f64 = row.iter().sum();
        if degree.is_nan() || degree <= 0.0 {
            return Err(ModelError::NonPositiveDegree { node: i, degree });
        }
        row.iter_mut().for_each(|v| *v /= degree);
    }
    Ok(p)
}

/// One propagation step `D^-1 (A + I) X Theta`, without activation.
pub fn mean_pool_propagate(
    x: &Matrix,
    adjacency: &Matrix,
    theta: &Matrix,
) -> Result<Matrix, ModelError> {
    let p = propagation_matrix(adjacency, SelfLoops::AddIdentity)?;
    Ok(p.matmul(x)?.matmul(theta)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    /// `Theta_l`: the first is `D x F`, the rest `F x F`.
    pub layers: Vec<Matrix>,
    /// `W`: `D x F` skip projection; absent for single-layer encoders.
    pub skip: Option<Matrix>,
}

impl EncoderParams {
    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` initialization.
    pub fn init(in_dim: usize, widths: &[usize], rng: &mut impl Rng) -> Result<Self, ModelError> {
        check_widths(widths)?;
        let mut layers = Vec::with_capacity(widths.len());
        let mut fan_in = in_dim;
        for &w in widths {
            layers.push(uniform_init(fan_in, w, rng));
            fan_in = w;
        }
        let skip = (widths.len() > 1).then(|| uniform_init(in_dim, widths[0], rng));
        Ok(EncoderParams { layers, skip })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Checks the layer chain against the input width and returns the output width.
    pub fn validate(&self, in_dim: usize) -> Result<usize, ModelError> {
        let first = self
            .layers
            .first()
            .ok_or_else(|| ModelError::Shape("encoder has no layers".into()))?;
        if first.rows() != in_dim {
            return Err(ModelError::Shape(format!(
                "first layer expects {} inputs, features have {in_dim}",
                first.rows()
            )));
        }
        let width = first.cols();
        for (l, theta) in self.layers.iter().enumerate().skip(1) {
            if theta.shape() != (width, width) {
                return Err(ModelError::Shape(format!(
                    "layer {l} is {}x{}, expected {width}x{width}",
                    theta.rows(),
                    theta.cols()
                )));
            }
        }
        match (&self.skip, self.layers.len()) {
            (None, 1) => {}
            (Some(w), l) if l > 1 => {
                if w.shape() != (in_dim, width) {
                    return Err(ModelError::Shape(format!(
                        "skip projection is {}x{}, expected {in_dim}x{width}",
                        w.rows(),
                        w.cols()
                    )));
                }
            }
            (None, _) => {
                return Err(ModelError::Shape(
                    "multi-layer encoder needs a skip projection".into(),
                ))
            }
            (Some(_), _) => {
                return Err(ModelError::Shape(
                    "single-layer encoder takes no skip projection".into(),
                ))
            }
        }
        Ok(width)
    }
}

pub(crate) fn check_widths(widths: &[usize]) -> Result<(), ModelError> {
    if widths.is_empty() || widths.contains(&0) {
        return Err(ModelError::Shape(format!("invalid conv widths {widths:?}")));
    }
    if widths.iter().any(|&w| w != widths[0]) {
        return Err(ModelError::Shape(format!(
            "all conv layers must share one width, got {widths:?}"
        )));
    }
    Ok(())
}

pub(crate) fn uniform_init(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Matrix {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Matrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-bound..bound))
}

/// Tape handles of the encoder parameters.
#[derive(Debug, Clone)]
pub struct EncoderVars {
    pub layers: Vec<Var>,
    pub skip: Option<Var>,
}

impl EncoderVars {
    pub fn record(tape: &mut Tape, params: &EncoderParams) -> Self {
        EncoderVars {
            layers: params
                .layers
                .iter()
                .map(|m| tape.param(m.clone()))
                .collect(),
            skip: params.skip.as_ref().map(|m| tape.param(m.clone())),
        }
    }
}

/// Records the encoder forward pass; `prop` is the propagation operator.
pub fn encode_on_tape(
    tape: &mut Tape,
    x: Var,
    prop: Var,
    vars: &EncoderVars,
) -> Result<Var, ModelError> {
    let n_layers = vars.layers.len();
    let px = tape.matmul(prop, x)?;
    let z = tape.matmul(px, vars.layers[0])?;
    let mut hidden = vec![tape.sigmoid(z)];

    for (l, &theta) in vars.layers.iter().enumerate().skip(1) {
        let input = if l + 1 == n_layers {
            let skip = vars.skip.ok_or_else(|| {
                ModelError::Shape("multi-layer encoder needs a skip projection".into())
            })?;
            let mut acc = tape.matmul(px, skip)?;
            for &h in &hidden {
                acc = tape.add(acc, h)?;
            }
            acc
        } else {
            *hidden.last().expect("at least one layer")
        };
        let propagated = tape.matmul(prop, input)?;
        let z = tape.matmul(propagated, theta)?;
        hidden.push(tape.sigmoid(z));
    }
    Ok(*hidden.last().expect("at least one layer"))
}

/// Encodes node features `x` (N×D) over `adjacency` into N×F embeddings.
pub fn encode(
    x: &Matrix,
    adjacency: &Matrix,
    params: &EncoderParams,
) -> Result<Matrix, ModelError> {
    let p = propagation_matrix(adjacency, SelfLoops::AddIdentity)?;
    encode_with_propagation(x, &p, params)
}

/// As [`encode`], with a precomputed propagation operator.
pub fn encode_with_propagation(
    x: &Matrix,
    propagation: &Matrix,
    params: &EncoderParams,
) -> Result<Matrix, ModelError> {
    params.validate(x.cols())?;
    if propagation.shape() != (x.rows(), x.rows()) {
        return Err(ModelError::Shape(format!(
            "propagation operator is {}x{} for {} nodes",
            propagation.rows(),
            propagation.cols(),
            x.rows()
        )));
    }
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let pv = tape.constant(propagation.clone());
    let vars = EncoderVars {
        layers: params
            .layers
            .iter()
            .map(|m| tape.constant(m.clone()))
            .collect(),
        skip: params.skip.as_ref().map(|m| tape.constant(m.clone())),
    };
    let h = encode_on_tape(&mut tape, xv, pv, &vars)?;
    Ok(tape.value(h).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::sigmoid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_node_propagation_by_hand() {
        let a = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let x = Matrix::column_vector(&[1.0, 3.0]);
        let out = mean_pool_propagate(&x, &a, &Matrix::identity(1)).unwrap();
        assert_eq!(out.as_slice(), &[2.0, 2.0]);
    }

    #[test]
    fn isolated_nodes_reduce_to_linear_map() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0], [0.5, 0.0]]).unwrap();
        let theta = Matrix::from_rows(&[[2.0, 0.0, 1.0], [1.0, -1.0, 0.5]]).unwrap();
        let out = mean_pool_propagate(&x, &Matrix::zeros(3, 3), &theta).unwrap();
        assert!(out.max_abs_diff(&x.matmul(&theta).unwrap()) < 1e-15);
    }

    #[test]
    fn constants_are_preserved() {
        let a = Matrix::from_rows(&[[1.0, 0.3, -0.2], [0.3, 1.0, 0.6], [-0.2, 0.6, 1.0]]).unwrap();
        let x = Matrix::filled(3, 2, 4.5);
        let out = mean_pool_propagate(&x, &a, &Matrix::identity(2)).unwrap();
        assert!(out.max_abs_diff(&x) < 1e-14);
    }

    #[test]
    fn non_positive_degree_is_an_error() {
        let a = Matrix::from_rows(&[[-1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            propagation_matrix(&a, SelfLoops::AddIdentity),
            Err(ModelError::NonPositiveDegree { node: 0, .. })
        ));
    }

    #[test]
    fn keep_diagonal_uses_adjacency_as_given() {
        let a = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let p = propagation_matrix(&a, SelfLoops::KeepDiagonal).unwrap();
        assert_eq!(p.as_slice(), &[0.5; 4]);
        let p = propagation_matrix(&a, SelfLoops::AddIdentity).unwrap();
        assert!((p.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_layer_is_sigmoid_of_one_propagation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = EncoderParams::init(3, &[4], &mut rng).unwrap();
        assert!(params.skip.is_none());
        let x = Matrix::from_fn(5, 3, |i, j| (i as f64 - j as f64) * 0.3);
        let a = Matrix::identity(5);
        let h = encode(&x, &a, &params).unwrap();
        let expected = sigmoid(&mean_pool_propagate(&x, &a, &params.layers[0]).unwrap());
        assert!(h.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn width_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(EncoderParams::init(3, &[8, 16], &mut rng).is_err());
        assert!(EncoderParams::init(3, &[], &mut rng).is_err());
        let params = EncoderParams::init(3, &[4, 4], &mut rng).unwrap();
        let err = encode(&Matrix::zeros(5, 2), &Matrix::identity(5), &params).unwrap_err();
        assert!(matches!(err, ModelError::Shape(_)));
    }
}
