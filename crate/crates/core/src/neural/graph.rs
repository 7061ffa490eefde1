//! Tape-based reverse-mode differentiation over [`Matrix`] values.
//!
//! A [`Graph`] records every operation as it is evaluated; [`Graph::backward`]
//! walks the tape in reverse and returns the gradient of a scalar node with
//! respect to every node that contributed to it.

use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `a (n x m) + row (1 x m)`
    AddRow(Var, Var),
    /// `a (n x m) * col (n x 1)`
    MulCol(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Relu(Var),
    Abs(Var),
    Square(Var),
    Softplus(Var),
    LogSoftmax(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    Sum(Var),
    /// Scalar node with precomputed partial derivatives.
    Custom(Vec<(Var, Matrix)>),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    /// Whether some gradient-tracking leaf reaches this node.
    tracked: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        let t = |v: &Var| self.nodes[v.0].tracked;
        let tracked = match &op {
            Op::Leaf => true,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::AddRow(a, b) | Op::MulCol(a, b) => {
                t(a) || t(b)
            }
            Op::Scale(a, _)
            | Op::Offset(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Relu(a)
            | Op::Abs(a)
            | Op::Square(a)
            | Op::Softplus(a)
            | Op::LogSoftmax(a)
            | Op::SliceCols(a, _)
            | Op::Sum(a) => t(a),
            Op::ConcatCols(ps) => ps.iter().any(t),
            Op::Custom(ps) => ps.iter().any(|(v, _)| t(v)),
        };
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.shape(), (1, 1));
        m.get(0, 0)
    }

    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    /// A leaf that never receives a gradient.
    pub fn input(&mut self, value: Matrix) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, tracked: false });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: f64, rows: usize, cols: usize) -> Var {
        self.input(Matrix::filled(rows, cols, value))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (av, rv) = (self.value(a), self.value(row));
        assert_eq!(rv.rows(), 1, "add_row expects a row vector");
        assert_eq!(av.cols(), rv.cols(), "add_row width mismatch");
        let mut v = av.clone();
        for r in 0..v.rows() {
            for (x, b) in v.row_mut(r).iter_mut().zip(rv.row(0)) {
                *x += b;
            }
        }
        self.push(v, Op::AddRow(a, row))
    }

    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        let (av, cv) = (self.value(a), self.value(col));
        assert_eq!(cv.cols(), 1, "mul_col expects a column vector");
        assert_eq!(av.rows(), cv.rows(), "mul_col height mismatch");
        let mut v = av.clone();
        for r in 0..v.rows() {
            let s = cv.get(r, 0);
            v.row_mut(r).iter_mut().for_each(|x| *x *= s);
        }
        self.push(v, Op::MulCol(a, col))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).map(|x| s * x);
        self.push(v, Op::Scale(a, s))
    }

    /// `a + s` elementwise.
    pub fn offset(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).map(|x| x + s);
        self.push(v, Op::Offset(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::ln);
        self.push(v, Op::Log(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::abs);
        self.push(v, Op::Abs(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x * x);
        self.push(v, Op::Square(a))
    }

    /// `ln(1 + e^x)`, computed stably.
    pub fn softplus(&mut self, a: Var) -> Var {
        let v = self.value(a).map(softplus);
        self.push(v, Op::Softplus(a))
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for r in 0..v.rows() {
            let row = v.row_mut(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|x| *x -= lse);
        }
        self.push(v, Op::LogSoftmax(a))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Var {
        let av = self.value(a);
        assert!(start + width <= av.cols(), "slice out of range");
        let mut v = Matrix::zeros(av.rows(), width);
        for r in 0..av.rows() {
            v.row_mut(r).copy_from_slice(&av.row(r)[start..start + width]);
        }
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut v = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let pv = self.value(p);
                assert_eq!(pv.rows(), rows, "concat height mismatch");
                v.row_mut(r)[offset..offset + pv.cols()].copy_from_slice(pv.row(r));
                offset += pv.cols();
            }
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Matrix::scalar(s), Op::Sum(a))
    }

    /// Records a scalar computed outside the tape, given its partial
    /// derivatives with respect to `inputs`.
    pub fn custom_scalar(&mut self, value: f64, partials: Vec<(Var, Matrix)>) -> Var {
        for (v, g) in &partials {
            assert_eq!(self.value(*v).shape(), g.shape(), "custom partial shape mismatch");
        }
        self.push(Matrix::scalar(value), Op::Custom(partials))
    }

    /// Gradients of the scalar `output` with respect to every node.
    pub fn backward(&self, output: Var) -> Gradients {
        assert_eq!(self.value(output).shape(), (1, 1), "backward needs a scalar output");
        let mut grads: Vec<Option<Matrix>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Matrix::scalar(1.0));

        let acc = |grads: &mut [Option<Matrix>], v: Var, g: Matrix| {
            if !self.nodes[v.0].tracked {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.axpy(1.0, &g),
                slot @ None => *slot = Some(g),
            }
        };

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let out = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    if self.tracked(*a) {
                        acc(&mut grads, *a, g.matmul_t(self.value(*b)));
                    }
                    if self.tracked(*b) {
                        acc(&mut grads, *b, self.value(*a).t_matmul(&g));
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.map(|x| -x));
                }
                Op::Mul(a, b) => {
                    acc(&mut grads, *a, g.zip_map(self.value(*b), |x, y| x * y));
                    acc(&mut grads, *b, g.zip_map(self.value(*a), |x, y| x * y));
                }
                Op::AddRow(a, row) => {
                    let mut gr = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (x, y) in gr.row_mut(0).iter_mut().zip(g.row(r)) {
                            *x += y;
                        }
                    }
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *row, gr);
                }
                Op::MulCol(a, col) => {
                    let (av, cv) = (self.value(*a), self.value(*col));
                    let mut ga = g.clone();
                    let mut gc = Matrix::zeros(cv.rows(), 1);
                    for r in 0..g.rows() {
                        let s = cv.get(r, 0);
                        ga.row_mut(r).iter_mut().for_each(|x| *x *= s);
                        gc.set(r, 0, g.row(r).iter().zip(av.row(r)).map(|(x, y)| x * y).sum());
                    }
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *col, gc);
                }
                Op::Scale(a, s) => acc(&mut grads, *a, g.map(|x| s * x)),
                Op::Offset(a) => acc(&mut grads, *a, g.clone()),
                Op::Sigmoid(a) => acc(&mut grads, *a, g.zip_map(out, |x, y| x * y * (1.0 - y))),
                Op::Tanh(a) => acc(&mut grads, *a, g.zip_map(out, |x, y| x * (1.0 - y * y))),
                Op::Exp(a) => acc(&mut grads, *a, g.zip_map(out, |x, y| x * y)),
                Op::Log(a) => acc(&mut grads, *a, g.zip_map(self.value(*a), |x, y| x / y)),
                Op::Relu(a) => {
                    acc(&mut grads, *a, g.zip_map(self.value(*a), |x, y| if y > 0.0 { x } else { 0.0 }))
                }
                Op::Abs(a) => acc(&mut grads, *a, g.zip_map(self.value(*a), |x, y| x * y.signum())),
                Op::Square(a) => acc(&mut grads, *a, g.zip_map(self.value(*a), |x, y| 2.0 * x * y)),
                Op::Softplus(a) => acc(&mut grads, *a, g.zip_map(self.value(*a), |x, y| x * sigmoid(y))),
                Op::LogSoftmax(a) => {
                    let mut ga = g.clone();
                    for r in 0..g.rows() {
                        let gsum: f64 = g.row(r).iter().sum();
                        for (x, y) in ga.row_mut(r).iter_mut().zip(out.row(r)) {
                            *x -= y.exp() * gsum;
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::SliceCols(a, start) => {
                    let av = self.value(*a);
                    let mut ga = Matrix::zeros(av.rows(), av.cols());
                    for r in 0..g.rows() {
                        ga.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let mut gp = Matrix::zeros(g.rows(), w);
                        for r in 0..g.rows() {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + w]);
                        }
                        acc(&mut grads, p, gp);
                        offset += w;
                    }
                }
                Op::Sum(a) => {
                    let av = self.value(*a);
                    acc(&mut grads, *a, Matrix::filled(av.rows(), av.cols(), g.get(0, 0)));
                }
                Op::Custom(partials) => {
                    let s = g.get(0, 0);
                    for (v, p) in partials {
                        acc(&mut grads, *v, p.map(|x| s * x));
                    }
                }
            }
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }
}

/// Result of [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient for `v`, or `None` if `v` does not influence the output.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for `v`, zero-filled to `shape` when absent.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Matrix {
        self.get(v).cloned().unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }
}
