//! Measurement suites shared by the component tests and the acceptance run.
//! Each returns the worst deviation it saw so callers pick the tolerance.

use brain_infomax::analysis::silhouette;
use brain_infomax::classifier::{
    assignment_matrix, assignment_on_tape, link_reg_loss, link_reg_on_tape, mlp_logit_on_tape,
    pool, pooled_readout_on_tape, readout, MlpVars, PoolParams,
};
use brain_infomax::discriminator::{score, scores_on_tape};
use brain_infomax::encoder::{
    encode, encode_on_tape, mean_pool_propagate, propagation_matrix, EncoderParams, EncoderVars,
    SelfLoops,
};
use brain_infomax::model::{ModelError, ParamVars};
use brain_infomax::numeric::gradcheck::check_gradients;
use brain_infomax::training::{
    bce, f_score, infomax_loss, objective_on_tape, InfomaxForm, TrainError,
};
use brain_infomax::{Matrix, TrainConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{prepared, random_adjacency, random_graph, random_params, uniform};

pub const GRAD_NODES: usize = 5;
const STEP: f64 = 1e-5;
const FLOOR: f64 = 1e-6;

fn widths(rng: &mut ChaCha8Rng) -> Vec<usize> {
    match rng.random_range(0..3) {
        0 => vec![3],
        1 => vec![4, 4],
        _ => vec![3, 3],
    }
}

/// Max relative error of the encoder gradient, one entry per case.
pub fn encoder_gradient_errors(cases: u64) -> Vec<f64> {
    (0..cases)
        .map(|case| {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + case);
            let g = prepared(&random_graph(GRAD_NODES, 0, &mut rng));
            let params = random_params(GRAD_NODES, &widths(&mut rng), &mut rng);
            let weights = uniform(GRAD_NODES, params.width(), -1.0, 1.0, &mut rng);
            let mut inputs: Vec<Matrix> = params.encoder.layers.clone();
            inputs.extend(params.encoder.skip.clone());
            inputs.push(g.features.clone());
            let n_layers = params.encoder.layers.len();
            check_gradients::<ModelError>(&inputs, STEP, FLOOR, |t, v| {
                let vars = EncoderVars {
                    layers: v[..n_layers].to_vec(),
                    skip: (v.len() == n_layers + 2).then(|| v[n_layers]),
                };
                let prop = t.constant(g.propagation.clone());
                let h = encode_on_tape(t, *v.last().unwrap(), prop, &vars)?;
                let w = t.constant(weights.clone());
                let hw = t.mul(h, w)?;
                Ok(t.sum(hw))
            })
            .unwrap()
            .max_rel_error
        })
        .collect()
}

/// Assignment, pooled readout, MLP logit and link regularizer together.
pub fn pooling_head_gradient_errors(cases: u64) -> Vec<f64> {
    (0..cases)
        .map(|case| {
            let mut rng = ChaCha8Rng::seed_from_u64(200 + case);
            let g = prepared(&random_graph(GRAD_NODES, 1, &mut rng));
            let params = random_params(GRAD_NODES, &widths(&mut rng), &mut rng);
            let h = uniform(GRAD_NODES, params.width(), 0.0, 1.0, &mut rng);
            let mlp = &params.mlp;
            let inputs = vec![
                h,
                params.pool.weight.clone(),
                mlp.w1.clone(),
                mlp.b1.clone(),
                mlp.w2.clone(),
                mlp.b2.clone(),
            ];
            check_gradients::<ModelError>(&inputs, STEP, FLOOR, |t, v| {
                let prop = t.constant(g.propagation.clone());
                let adj = t.constant(g.adjacency.clone());
                let f = assignment_on_tape(t, v[0], prop, v[1])?;
                let r = pooled_readout_on_tape(t, v[0], f)?;
                let mlp = MlpVars {
                    w1: v[2],
                    b1: v[3],
                    w2: v[4],
                    b2: v[5],
                };
                let logit = mlp_logit_on_tape(t, r, &mlp)?;
                let reg = link_reg_on_tape(t, adj, f)?;
                let reg = t.scale(reg, 0.3);
                Ok(t.add(logit, reg)?)
            })
            .unwrap()
            .max_rel_error
        })
        .collect()
}

/// Bilinear scores fed through the standard infomax cross-entropy.
pub fn discriminator_gradient_errors(cases: u64) -> Vec<f64> {
    (0..cases)
        .map(|case| {
            let mut rng = ChaCha8Rng::seed_from_u64(300 + case);
            let f = rng.random_range(2..6);
            let inputs = vec![
                uniform(GRAD_NODES, f, 0.0, 1.0, &mut rng),
                uniform(GRAD_NODES, f, 0.0, 1.0, &mut rng),
                uniform(f, f, -1.5, 1.5, &mut rng),
                uniform(1, f, -2.0, 2.0, &mut rng),
            ];
            check_gradients::<ModelError>(&inputs, STEP, FLOOR, |t, v| {
                let s = t.sigmoid(v[3]);
                let pos = scores_on_tape(t, v[0], v[2], s)?;
                let neg = scores_on_tape(t, v[1], v[2], s)?;
                let lp = t.ln(pos);
                let lp = t.mean(lp);
                let one_minus = t.affine(neg, -1.0, 1.0);
                let ln_ = t.ln(one_minus);
                let ln_ = t.mean(ln_);
                let both = t.add(lp, ln_)?;
                Ok(t.scale(both, -0.5))
            })
            .unwrap()
            .max_rel_error
        })
        .collect()
}

/// The full weighted objective with respect to every model tensor.
pub fn joint_gradient_errors(cases: u64) -> Vec<f64> {
    (0..cases)
        .map(|case| {
            let mut rng = ChaCha8Rng::seed_from_u64(400 + case);
            let label = (case % 2) as u8;
            let g = prepared(&random_graph(GRAD_NODES, label, &mut rng));
            let negs: Vec<_> = (0..1 + case % 2)
                .map(|_| prepared(&random_graph(GRAD_NODES, 1 - label, &mut rng)))
                .collect();
            let neg_refs: Vec<_> = negs.iter().collect();
            let params = random_params(GRAD_NODES, &widths(&mut rng), &mut rng);
            let cfg = TrainConfig {
                conv_widths: vec![params.width(); params.encoder.layers.len()],
                lambda_infomax: rng.random_range(0.5..1.5),
                lambda_reg: rng.random_range(0.05..0.5),
                infomax_form: if case % 5 == 4 {
                    InfomaxForm::Literal
                } else {
                    InfomaxForm::Standard
                },
                ..TrainConfig::default()
            };
            let inputs: Vec<Matrix> = params.tensors().into_iter().cloned().collect();
            check_gradients::<TrainError>(&inputs, STEP, FLOOR, |t, v| {
                let vars = ParamVars::from_slice(v, &params)?;
                Ok(objective_on_tape(t, &vars, &g, &neg_refs, &cfg)?.total)
            })
            .unwrap()
            .max_rel_error
        })
        .collect()
}

/// Relabels the nodes of `a` so node `i` of the result is node `perm[i]`.
pub fn permute_graph(a: &Matrix, perm: &[usize]) -> Matrix {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| a.get(perm[i], perm[j]))
}

/// Worst deviation of `encode(perm X, perm A perm^T) = perm encode(X, A)`.
pub fn permutation_equivariance_deviation(cases: u64) -> f64 {
    (0..cases)
        .map(|case| {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + case);
            let n = rng.random_range(4..20);
            let widths: &[usize] = if case % 2 == 0 { &[6, 6] } else { &[5, 5, 5] };
            let params = EncoderParams::init(10, widths, &mut rng).unwrap();
            let x = uniform(n, 10, -2.0, 2.0, &mut rng);
            let a = random_adjacency(n, &mut rng);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let h = encode(&x, &a, &params).unwrap();
            let hp = encode(&x.permute_rows(&perm), &permute_graph(&a, &perm), &params).unwrap();
            hp.max_abs_diff(&h.permute_rows(&perm))
        })
        .fold(0.0, f64::max)
}

/// Worst deviation of `P c = c` for constant columns `c`.
pub fn constant_preservation_deviation(cases: u64) -> f64 {
    (0..cases)
        .map(|case| {
            let mut rng = ChaCha8Rng::seed_from_u64(600 + case);
            let n = rng.random_range(2..30);
            let c = rng.random_range(-5.0..5.0);
            let loops = if case % 2 == 0 {
                SelfLoops::AddIdentity
            } else {
                SelfLoops::KeepDiagonal
            };
            let p = propagation_matrix(&random_adjacency(n, &mut rng), loops).unwrap();
            let pc = p.matmul(&Matrix::filled(n, 3, c)).unwrap();
            pc.max_abs_diff(&Matrix::filled(n, 3, c))
        })
        .fold(0.0, f64::max)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn fixed_adjacency() -> Matrix {
    Matrix::from_rows(&[
        [1.0, 0.5, 0.2, 0.0],
        [0.5, 1.0, -0.1, 0.3],
        [0.2, -0.1, 1.0, 0.8],
        [0.0, 0.3, 0.8, 1.0],
    ])
    .unwrap()
}

fn fixed_features() -> Matrix {
    Matrix::from_rows(&[[0.3, -1.2], [1.5, 0.4], [-0.7, 0.9], [0.1, 2.0]]).unwrap()
}

/// Each library operation against a loop-by-loop recomputation on fixed
/// instances; returns `(operation, absolute deviation)`.
#[allow(clippy::needless_range_loop)]
pub fn oracle_deviations() -> Vec<(&'static str, f64)> {
    let a = fixed_adjacency();
    let x = fixed_features();
    let theta = Matrix::from_rows(&[[0.5, -0.3, 0.8], [0.2, 0.7, -0.6]]).unwrap();
    let n = 4;
    let mut out = Vec::new();

    // Propagation: row i is sum_j (A + I)_ij x_j theta / sum_j (A + I)_ij.
    let lib = mean_pool_propagate(&x, &a, &theta).unwrap();
    let mut dev = 0.0f64;
    for i in 0..n {
        let degree: f64 = (0..n).map(|j| a.get(i, j) + f64::from(i == j)).sum();
        for k in 0..3 {
            let mut v = 0.0;
            for j in 0..n {
                let w = a.get(i, j) + f64::from(i == j);
                for d in 0..2 {
                    v += w * x.get(j, d) * theta.get(d, k);
                }
            }
            dev = dev.max((lib.get(i, k) - v / degree).abs());
        }
    }
    out.push(("message passing", dev));

    // Pooling: S = softmax(P H W), H' = S^T H, A' = S^T A S, r = colsum(H') / Q.
    let h = Matrix::from_fn(n, 3, |i, k| sigmoid(lib.get(i, k)));
    let pool_w = Matrix::from_rows(&[[0.4, -0.9], [1.1, 0.3], [-0.5, 0.6]]).unwrap();
    let params = PoolParams {
        weight: pool_w.clone(),
    };
    let s = assignment_matrix(&h, &a, &params).unwrap();
    let mut s_ref = vec![[0.0; 2]; n];
    for (i, row) in s_ref.iter_mut().enumerate() {
        let degree: f64 = (0..n).map(|j| a.get(i, j) + f64::from(i == j)).sum();
        let mut logits = [0.0; 2];
        for (q, l) in logits.iter_mut().enumerate() {
            for j in 0..n {
                let w = (a.get(i, j) + f64::from(i == j)) / degree;
                for k in 0..3 {
                    *l += w * h.get(j, k) * pool_w.get(k, q);
                }
            }
        }
        let z = logits[0].exp() + logits[1].exp();
        *row = [logits[0].exp() / z, logits[1].exp() / z];
    }
    let dev = (0..n)
        .flat_map(|i| (0..2).map(move |q| (i, q)))
        .map(|(i, q)| (s.get(i, q) - s_ref[i][q]).abs())
        .fold(0.0, f64::max);
    out.push(("assignment", dev));

    let (hp, ap) = pool(&h, &a, &s).unwrap();
    let mut dev = 0.0f64;
    for q in 0..2 {
        for k in 0..3 {
            let v: f64 = (0..n).map(|i| s_ref[i][q] * h.get(i, k)).sum();
            dev = dev.max((hp.get(q, k) - v).abs());
        }
        for p in 0..2 {
            let mut v = 0.0;
            for i in 0..n {
                for j in 0..n {
                    v += s_ref[i][q] * a.get(i, j) * s_ref[j][p];
                }
            }
            dev = dev.max((ap.get(q, p) - v).abs());
        }
    }
    out.push(("pooling products", dev));

    let r = readout(&hp).unwrap();
    let dev = (0..3)
        .map(|k| {
            let v: f64 = (0..n).map(|i| h.get(i, k)).sum::<f64>() / 2.0;
            (r[k] - v).abs()
        })
        .fold(0.0, f64::max);
    out.push(("readout", dev));

    let mut frob = 0.0;
    for i in 0..n {
        for j in 0..n {
            let fft = s_ref[i][0] * s_ref[j][0] + s_ref[i][1] * s_ref[j][1];
            frob += (a.get(i, j) - fft).powi(2);
        }
    }
    out.push((
        "link regularizer",
        (link_reg_loss(&a, &s).unwrap() - frob.sqrt()).abs(),
    ));

    // Bilinear score.
    let hv = [0.3, -0.8, 1.1];
    let sv = [0.6, 0.2, 0.9];
    let m = Matrix::from_rows(&[[1.0, 0.1, -0.2], [0.05, 0.9, 0.3], [-0.4, 0.2, 1.2]]).unwrap();
    let mut bil = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            bil += hv[i] * m.get(i, j) * sv[j];
        }
    }
    out.push((
        "bilinear score",
        (score(&hv, &sv, &m).unwrap() - sigmoid(bil)).abs(),
    ));

    // Cross-entropy and both infomax forms.
    let dev = [(0.8, 1u8), (0.8, 0), (0.25, 1), (0.5, 0)]
        .iter()
        .map(|&(p, y)| {
            let expected = if y == 1 {
                -f64::ln(p)
            } else {
                -f64::ln(1.0 - p)
            };
            (bce(p, y) - expected).abs()
        })
        .fold(0.0, f64::max);
    out.push(("cross-entropy", dev));
    let pos = [0.9, 0.7, 0.6];
    let neg = [0.2, 0.4];
    let standard = -0.5
        * ((0.9f64.ln() + 0.7f64.ln() + 0.6f64.ln()) / 3.0 + (0.8f64.ln() + 0.6f64.ln()) / 2.0);
    let literal = 0.5
        * ((0.9f64.ln() + 0.7f64.ln() + 0.6f64.ln()) / 3.0
            + ((1.0 - 0.2f64.ln()) + (1.0 - 0.4f64.ln())) / 2.0);
    out.push((
        "infomax loss",
        (infomax_loss(&pos, &neg, InfomaxForm::Standard) - standard)
            .abs()
            .max((infomax_loss(&pos, &neg, InfomaxForm::Literal) - literal).abs()),
    ));

    // Silhouette on a fixed 2-D instance.
    let pts =
        Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [4.0, 4.0], [5.0, 3.0]]).unwrap();
    let labels = [0u8, 0, 0, 1, 1];
    let dist = |i: usize, j: usize| {
        ((pts.get(i, 0) - pts.get(j, 0)).powi(2) + (pts.get(i, 1) - pts.get(j, 1)).powi(2)).sqrt()
    };
    let mut total = 0.0;
    for i in 0..5 {
        let same: Vec<usize> = (0..5)
            .filter(|&j| j != i && labels[j] == labels[i])
            .collect();
        let other: Vec<usize> = (0..5).filter(|&j| labels[j] != labels[i]).collect();
        let a_i = same.iter().map(|&j| dist(i, j)).sum::<f64>() / same.len() as f64;
        let b_i = other.iter().map(|&j| dist(i, j)).sum::<f64>() / other.len() as f64;
        total += (b_i - a_i) / a_i.max(b_i);
    }
    out.push((
        "silhouette",
        (silhouette(&pts, &labels).unwrap() - total / 5.0).abs(),
    ));

    // F-score: tp 3, fp 1, fn 2.
    let preds = [1u8, 1, 1, 1, 0, 0, 0];
    let truth = [1u8, 1, 1, 0, 1, 1, 0];
    out.push(("f-score", (f_score(&preds, &truth) - 6.0 / 9.0).abs()));

    out
}
