//! Dense soft-assignment pooling, mean readout and the MLP head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{propagation_matrix, uniform_init, SelfLoops};
use crate::model::ModelError;
use crate::numeric::{sigmoid_scalar, softmax_rows, Matrix, Tape, Var};

/// Number of pooled nodes for `n` input nodes: `ceil(ratio * n)`, at least 1.
pub fn pooled_size(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).ceil() as usize).clamp(1, n.max(1))
}

/// Weights of the graph convolution producing assignment logits (F×Q).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolParams {
    pub weight: Matrix,
}

impl PoolParams {
    pub fn init(width: usize, q: usize, rng: &mut impl Rng) -> Self {
        PoolParams {
            weight: uniform_init(width, q, rng),
        }
    }

    pub fn num_clusters(&self) -> usize {
        self.weight.cols()
    }
}

/// One hidden layer with sigmoid activation, then a single logit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

impl MlpParams {
    pub fn init(width: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        MlpParams {
            w1: uniform_init(width, hidden, rng),
            b1: Matrix::zeros(1, hidden),
            w2: uniform_init(hidden, 1, rng),
            b2: Matrix::zeros(1, 1),
        }
    }

    pub fn zeros(width: usize, hidden: usize) -> Self {
        MlpParams {
            w1: Matrix::zeros(width, hidden),
            b1: Matrix::zeros(1, hidden),
            w2: Matrix::zeros(hidden, 1),
            b2: Matrix::zeros(1, 1),
        }
    }
}

/// Soft cluster assignment `softmax_rows(MP(H, A))` (N×Q).
pub fn assignment_matrix(
    h: &Matrix,
    adjacency: &Matrix,
    pool: &PoolParams,
) -> Result<Matrix, ModelError> {
    let p = propagation_matrix(adjacency, SelfLoops::AddIdentity)?;
    Ok(softmax_rows(&p.matmul(h)?.matmul(&pool.weight)?))
}

/// Pooled features `F^T H` (Q×F) and pooled adjacency `F^T A F` (Q×Q).
pub fn pool(
    h: &Matrix,
    adjacency: &Matrix,
    assignment: &Matrix,
) -> Result<(Matrix, Matrix), ModelError> {
    let ft = assignment.transpose();
    let hp = ft.matmul(h)?;
    let ap = ft.matmul(adjacency)?.matmul(assignment)?;
    Ok((hp, ap))
}

/// Mean of the pooled node features.
pub fn readout(hp: &Matrix) -> Result<Vec<f64>, ModelError> {
    if hp.rows() == 0 {
        return Err(ModelError::Shape(
            "readout needs at least one pooled node".into(),
        ));
    }
    Ok(hp.column_means().into_vec())
}

/// Probability of the positive class for readout vector `r`.
pub fn classify(r: &[f64], mlp: &MlpParams) -> Result<f64, ModelError> {
    let mut tape = Tape::new();
    let rv = tape.constant(Matrix::row_vector(r));
    let vars = MlpVars::constants(&mut tape, mlp);
    let logit = mlp_logit_on_tape(&mut tape, rv, &vars)?;
    Ok(sigmoid_scalar(tape.scalar(logit)?))
}

/// `||A - F F^T||_F`.
pub fn link_reg_loss(adjacency: &Matrix, assignment: &Matrix) -> Result<f64, ModelError> {
    let fft = assignment.matmul(&assignment.transpose())?;
    Ok(adjacency.sub(&fft)?.frobenius_norm())
}

#[derive(Debug, Clone)]
pub struct MlpVars {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

impl MlpVars {
    pub fn record(tape: &mut Tape, mlp: &MlpParams) -> Self {
        MlpVars {
            w1: tape.param(mlp.w1.clone()),
            b1: tape.param(mlp.b1.clone()),
            w2: tape.param(mlp.w2.clone()),
            b2: tape.param(mlp.b2.clone()),
        }
    }

    fn constants(tape: &mut Tape, mlp: &MlpParams) -> Self {
        MlpVars {
            w1: tape.constant(mlp.w1.clone()),
            b1: tape.constant(mlp.b1.clone()),
            w2: tape.constant(mlp.w2.clone()),
            b2: tape.constant(mlp.b2.clone()),
        }
    }
}

pub fn assignment_on_tape(
    tape: &mut Tape,
    h: Var,
    prop: Var,
    weight: Var,
) -> Result<Var, ModelError> {
    let ph = tape.matmul(prop, h)?;
    let logits = tape.matmul(ph, weight)?;
    Ok(tape.softmax_rows(logits))
}

/// Pooled features followed by the mean readout, as a 1×F value.
pub fn pooled_readout_on_tape(tape: &mut Tape, h: Var, assignment: Var) -> Result<Var, ModelError> {
    let ft = tape.transpose(assignment);
    let hp = tape.matmul(ft, h)?;
    Ok(tape.column_means(hp))
}

pub fn mlp_logit_on_tape(tape: &mut Tape, r: Var, mlp: &MlpVars) -> Result<Var, ModelError> {
    let z1 = tape.matmul(r, mlp.w1)?;
    let z1 = tape.add_row(z1, mlp.b1)?;
    let a1 = tape.sigmoid(z1);
    let z2 = tape.matmul(a1, mlp.w2)?;
    Ok(tape.add_row(z2, mlp.b2)?)
}

pub fn link_reg_on_tape(
    tape: &mut Tape,
    adjacency: Var,
    assignment: Var,
) -> Result<Var, ModelError> {
    let ft = tape.transpose(assignment);
    let fft = tape.matmul(assignment, ft)?;
    let diff = tape.sub(adjacency, fft)?;
    Ok(tape.frobenius_norm(diff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::sigmoid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn sym_adjacency(n: usize, seed: u64) -> Matrix {
        let r = random(n, n, seed);
        Matrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else {
                0.4 * (r.get(i, j) + r.get(j, i))
            }
        })
    }

    #[test]
    fn pooled_size_rounds_up() {
        assert_eq!(pooled_size(148, 0.5), 74);
        assert_eq!(pooled_size(5, 0.5), 3);
        assert_eq!(pooled_size(1, 0.5), 1);
    }

    #[test]
    fn assignment_rows_are_distributions() {
        let f = assignment_matrix(
            &random(6, 3, 1),
            &sym_adjacency(6, 2),
            &PoolParams {
                weight: random(3, 3, 3),
            },
        )
        .unwrap();
        for s in f.row_sums() {
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(f.as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_pool_weights_give_uniform_rows() {
        let f = assignment_matrix(
            &random(5, 4, 1),
            &sym_adjacency(5, 2),
            &PoolParams {
                weight: Matrix::zeros(4, 3),
            },
        )
        .unwrap();
        assert!(f.max_abs_diff(&Matrix::filled(5, 3, 1.0 / 3.0)) < 1e-15);
    }

    #[test]
    fn identity_pooling_is_a_no_op() {
        let h = random(4, 3, 5);
        let a = sym_adjacency(4, 6);
        let (hp, ap) = pool(&h, &a, &Matrix::identity(4)).unwrap();
        assert_eq!(hp, h);
        assert_eq!(ap, a);
    }

    #[test]
    fn uniform_column_collapses_to_means() {
        let h = random(4, 3, 5);
        let f = Matrix::filled(4, 1, 0.25);
        let (hp, _) = pool(&h, &sym_adjacency(4, 1), &f).unwrap();
        let means = h.column_means();
        assert!(hp.max_abs_diff(&means) < 1e-15);
    }

    #[test]
    fn pooled_adjacency_stays_symmetric() {
        let f = softmax_rows(&random(7, 3, 9));
        let (_, ap) = pool(&random(7, 2, 1), &sym_adjacency(7, 4), &f).unwrap();
        assert!(ap.is_symmetric(1e-12));
    }

    #[test]
    fn readout_edge_cases() {
        let v = [0.3, -1.2, 2.0];
        let same = Matrix::from_rows(&[v, v, v]).unwrap();
        assert_eq!(readout(&same).unwrap(), v.to_vec());
        let opposite = Matrix::from_rows(&[v, v.map(|x| -x)]).unwrap();
        assert!(readout(&opposite).unwrap().iter().all(|x| x.abs() < 1e-15));
        assert!(readout(&Matrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn zero_mlp_gives_one_half() {
        assert_eq!(
            classify(&[1.0, -2.0, 3.0], &MlpParams::zeros(3, 3)).unwrap(),
            0.5
        );
    }

    #[test]
    fn mlp_matches_straight_line_evaluation() {
        let mlp = MlpParams {
            w1: Matrix::from_rows(&[[0.5, -1.0, 0.25, 2.0], [1.5, 0.3, -0.7, 0.0]]).unwrap(),
            b1: Matrix::row_vector(&[0.1, -0.2, 0.0, 0.3]),
            w2: Matrix::column_vector(&[1.0, -0.5, 2.0, -1.5]),
            b2: Matrix::scalar(0.05),
        };
        let r = [0.8, -0.4];
        let mut logit = 0.05;
        for k in 0..4 {
            let z = r[0] * mlp.w1.get(0, k) + r[1] * mlp.w1.get(1, k) + mlp.b1.get(0, k);
            logit += mlp.w2.get(k, 0) / (1.0 + (-z).exp());
        }
        let expected = 1.0 / (1.0 + (-logit).exp());
        assert!((classify(&r, &mlp).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn link_loss_values() {
        let f = sigmoid(&random(4, 2, 1));
        let a = f.matmul(&f.transpose()).unwrap();
        assert!(link_reg_loss(&a, &f).unwrap() < 1e-15);
        assert_eq!(
            link_reg_loss(&Matrix::identity(2), &Matrix::identity(2)).unwrap(),
            0.0
        );
        let ones = Matrix::filled(2, 2, 1.0);
        let f = Matrix::column_vector(&[1.0, 0.0]);
        assert!((link_reg_loss(&ones, &f).unwrap() - 3f64.sqrt()).abs() < 1e-15);
    }
}
