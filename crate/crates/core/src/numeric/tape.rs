//! Reverse-mode differentiation over a linear record of matrix operations.
//!
//! Every operation appends a node whose inputs precede it, so the node order is
//! already a topological order and the backward sweep simply walks it in reverse.
//! Constants never receive gradients, and neither does anything computed only
//! from constants.

use super::matrix::gemm;
use super::{sigmoid, softmax_rows, Matrix, NumericError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Affine(Var, f64),
    Sigmoid(Var),
    SoftmaxRows(Var),
    Transpose(Var),
    Ln(Var),
    Clamp(Var, f64, f64),
    Sum(Var),
    ColumnMeans(Var),
    FrobeniusNorm(Var),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every node that required one.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Matrix> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient of `var`, or zeros shaped like `like` when nothing flowed into it.
    pub fn get_or_zeros(&self, var: Var, like: &Matrix) -> Matrix {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(like.rows(), like.cols()))
    }

    pub fn take(&mut self, var: Var) -> Option<Matrix> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Matrix {
        &self.nodes[var.0].value
    }

    pub fn scalar(&self, var: Var) -> Result<f64, NumericError> {
        self.value(var).to_scalar()
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let value = self.value(a).add(self.value(b))?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let value = self.value(a).sub(self.value(b))?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    /// Entrywise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let value = self.value(a).hadamard(self.value(b))?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    /// Adds the 1×cols row `row` to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, NumericError> {
        let (am, rm) = (self.value(a), self.value(row));
        if rm.rows() != 1 || rm.cols() != am.cols() {
            return Err(NumericError::shape("add_row", am, rm));
        }
        let mut value = am.clone();
        for i in 0..value.rows() {
            for (v, b) in value.row_mut(i).iter_mut().zip(rm.as_slice()) {
                *v += b;
            }
        }
        let rg = self.needs(&[a, row]);
        Ok(self.push(value, Op::AddRow(a, row), rg))
    }

    /// `scale * a + shift`, entrywise.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let value = self.value(a).map(|v| scale * v + shift);
        let rg = self.needs(&[a]);
        self.push(value, Op::Affine(a, scale), rg)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        self.affine(a, factor, 0.0)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = sigmoid(self.value(a));
        let rg = self.needs(&[a]);
        self.push(value, Op::Sigmoid(a), rg)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = softmax_rows(self.value(a));
        let rg = self.needs(&[a]);
        self.push(value, Op::SoftmaxRows(a), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let rg = self.needs(&[a]);
        self.push(value, Op::Transpose(a), rg)
    }

    /// Natural logarithm. Inputs are expected to be positive.
    pub fn ln(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::ln);
        let rg = self.needs(&[a]);
        self.push(value, Op::Ln(a), rg)
    }

    /// Clamps entries to `[lo, hi]`; clamped entries pass no gradient.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(a).map(|v| v.clamp(lo, hi));
        let rg = self.needs(&[a]);
        self.push(value, Op::Clamp(a, lo, hi), rg)
    }

    /// Sum of all entries, as a 1×1 value.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        let rg = self.needs(&[a]);
        self.push(value, Op::Sum(a), rg)
    }

    /// Mean of all entries, as a 1×1 value.
    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Column means, as a 1×cols value.
    pub fn column_means(&mut self, a: Var) -> Var {
        let value = self.value(a).column_means();
        let rg = self.needs(&[a]);
        self.push(value, Op::ColumnMeans(a), rg)
    }

    pub fn frobenius_norm(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).frobenius_norm());
        let rg = self.needs(&[a]);
        self.push(value, Op::FrobeniusNorm(a), rg)
    }

    pub fn backward(&self, root: Var) -> Result<Gradients, NumericError> {
        self.backward_with_seed(root, 1.0)
    }

    /// Propagates `seed` (the upstream derivative of the scalar root) back
    /// through every recorded node.
    pub fn backward_with_seed(&self, root: Var, seed: f64) -> Result<Gradients, NumericError> {
        let rv = self.value(root);
        if rv.shape() != (1, 1) {
            return Err(NumericError::NotScalar {
                rows: rv.rows(),
                cols: rv.cols(),
            });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Matrix::scalar(seed));

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &upstream, &mut grads);
            grads[idx] = Some(upstream);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], var: Var, contribution: Matrix) {
        if !self.nodes[var.0].requires_grad {
            return;
        }
        match &mut grads[var.0] {
            Some(g) => g.add_assign(&contribution),
            slot @ None => *slot = Some(contribution),
        }
    }

    fn wants(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn propagate(&self, node: &Node, up: &Matrix, grads: &mut [Option<Matrix>]) {
        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(a), self.value(b));
                if self.wants(a) {
                    let mut ga = Matrix::zeros(av.rows(), av.cols());
                    gemm(1.0, up, false, bv, true, 0.0, &mut ga);
                    self.accumulate(grads, a, ga);
                }
                if self.wants(b) {
                    let mut gb = Matrix::zeros(bv.rows(), bv.cols());
                    gemm(1.0, av, true, up, false, 0.0, &mut gb);
                    self.accumulate(grads, b, gb);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, a, up.clone());
                self.accumulate(grads, b, up.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, a, up.clone());
                self.accumulate(grads, b, up.scale(-1.0));
            }
            Op::Mul(a, b) => {
                if self.wants(a) {
                    let g = up.hadamard(self.value(b)).expect("recorded shapes");
                    self.accumulate(grads, a, g);
                }
                if self.wants(b) {
                    let g = up.hadamard(self.value(a)).expect("recorded shapes");
                    self.accumulate(grads, b, g);
                }
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, a, up.clone());
                if self.wants(row) {
                    let g = up.column_means().scale(up.rows() as f64);
                    self.accumulate(grads, row, g);
                }
            }
            Op::Affine(a, scale) => self.accumulate(grads, a, up.scale(scale)),
            Op::Sigmoid(a) => {
                let y = &node.value;
                let g = Matrix::from_fn(y.rows(), y.cols(), |i, j| {
                    let s = y.get(i, j);
                    up.get(i, j) * s * (1.0 - s)
                });
                self.accumulate(grads, a, g);
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let mut g = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let (yr, ur) = (y.row(i), up.row(i));
                    let dot: f64 = yr.iter().zip(ur).map(|(p, q)| p * q).sum();
                    for (o, (p, q)) in g.row_mut(i).iter_mut().zip(yr.iter().zip(ur)) {
                        *o = p * (q - dot);
                    }
                }
                self.accumulate(grads, a, g);
            }
            Op::Transpose(a) => self.accumulate(grads, a, up.transpose()),
            Op::Ln(a) => {
                let g = up.zip_div(self.value(a)).expect("recorded shapes");
                self.accumulate(grads, a, g);
            }
            Op::Clamp(a, lo, hi) => {
                let x = self.value(a);
                let g = Matrix::from_fn(x.rows(), x.cols(), |i, j| {
                    let v = x.get(i, j);
                    if v > lo && v < hi {
                        up.get(i, j)
                    } else {
                        0.0
                    }
                });
                self.accumulate(grads, a, g);
            }
            Op::Sum(a) => {
                let x = self.value(a);
                self.accumulate(grads, a, Matrix::filled(x.rows(), x.cols(), up.get(0, 0)));
            }
            Op::ColumnMeans(a) => {
                let x = self.value(a);
                let n = x.rows() as f64;
                let g = Matrix::from_fn(x.rows(), x.cols(), |_, j| up.get(0, j) / n);
                self.accumulate(grads, a, g);
            }
            Op::FrobeniusNorm(a) => {
                let norm = node.value.get(0, 0);
                let x = self.value(a);
                // Subgradient zero at the origin.
                let g = if norm > 0.0 {
                    x.scale(up.get(0, 0) / norm)
                } else {
                    Matrix::zeros(x.rows(), x.cols())
                };
                self.accumulate(grads, a, g);
            }
        }
    }
}

impl Matrix {
    fn zip_div(&self, other: &Matrix) -> Result<Matrix, NumericError> {
        if self.shape() != other.shape() {
            return Err(NumericError::shape("div", self, other));
        }
        Ok(Matrix::from_fn(self.rows(), self.cols(), |i, j| {
            self.get(i, j) / other.get(i, j)
        }))
    }
}
