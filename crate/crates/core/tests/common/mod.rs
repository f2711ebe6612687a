#![allow(dead_code)]

pub mod suites;

use brain_infomax::encoder::SelfLoops;
use brain_infomax::{BrainGraph, Matrix, ModelParams, PreparedGraph};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Symmetric weighted adjacency with unit diagonal and mostly positive edges,
/// so every row of `A + I` has a positive sum.
pub fn random_adjacency(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut a = Matrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            let w = rng.random_range(-0.2..0.9);
            a.set(i, j, w);
            a.set(j, i, w);
        }
    }
    a
}

pub fn random_graph(n: usize, label: u8, rng: &mut ChaCha8Rng) -> BrainGraph {
    let features = uniform(n, 10, -2.0, 2.0, rng);
    BrainGraph::new(
        format!("g{}", rng.random::<u32>()),
        label,
        features,
        random_adjacency(n, rng),
    )
    .unwrap()
}

pub fn prepared(g: &BrainGraph) -> PreparedGraph {
    PreparedGraph::new(g, SelfLoops::AddIdentity).unwrap()
}

/// Parameters scaled up from the default init so activations leave the
/// near-linear regime of the sigmoid.
pub fn random_params(n: usize, widths: &[usize], rng: &mut ChaCha8Rng) -> ModelParams {
    let mut p = ModelParams::init(10, widths, n, 0.5, rng).unwrap();
    for t in p.tensors_mut() {
        for v in t.as_mut_slice() {
            *v = 2.0 * *v + rng.random_range(-0.3..0.3);
        }
    }
    p
}
