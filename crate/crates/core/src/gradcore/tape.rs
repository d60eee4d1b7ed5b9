//! Reverse-mode tape.
//!
//! Nodes are appended in evaluation order, so the node vector is already a
//! topological order; `backward` walks it once from the loss down. Gradients
//! are computed into a scratch buffer and then added to each node's persistent
//! gradient, which gives plain accumulation semantics when `backward` runs more
//! than once on the same graph.

use std::cell::{Ref, RefCell};

use super::matrix::Matrix;
use super::param::Param;
use crate::error::{Error, Result};

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Sub(usize, usize),
    Hadamard(usize, usize),
    MulCol(usize, usize),
    Div(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    SoftmaxRows(usize),
    Log(usize),
    Exp(usize),
    ClampMin(usize, f64),
    Sum(usize),
    SumRows(usize),
    ConcatRows(Vec<usize>),
    Column(usize, usize),
    Pick(usize, Vec<usize>),
    Mix(usize, Vec<Matrix>),
    StraightThrough(usize),
    GradOnly(usize),
}

struct Node {
    value: Matrix,
    grad: Matrix,
    op: Op,
    requires_grad: bool,
}

/// A computation graph under construction.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{} {:?}", self.id, self.shape())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Matrix, op: Op, requires_grad: bool, name: &'static str) -> Result<Var<'_>> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        let mut nodes = self.nodes.borrow_mut();
        let (r, c) = value.shape();
        nodes.push(Node {
            value,
            grad: Matrix::zeros(r, c),
            op,
            requires_grad,
        });
        Ok(Var {
            tape: self,
            id: nodes.len() - 1,
        })
    }

    /// A leaf that receives gradients.
    pub fn variable(&self, value: Matrix) -> Var<'_> {
        self.push(value, Op::Leaf, true, "variable")
            .expect("leaf values must be finite")
    }

    /// A leaf that never receives gradients.
    pub fn constant(&self, value: Matrix) -> Var<'_> {
        self.push(value, Op::Leaf, false, "constant")
            .expect("constant values must be finite")
    }

    pub fn param(&self, p: &Param) -> Var<'_> {
        self.variable(p.value.clone())
    }

    /// Binds a list of parameters, preserving order.
    pub fn params(&self, ps: &[&Param]) -> Vec<Var<'_>> {
        ps.iter().map(|p| self.param(p)).collect()
    }

    fn needs(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    /// Runs reverse-mode accumulation from a scalar loss.
    pub fn backward(&self, loss: Var<'_>) -> Result<()> {
        let mut nodes = self.nodes.borrow_mut();
        let shape = nodes[loss.id].value.shape();
        if shape != (1, 1) {
            return Err(Error::NonScalarLoss(shape));
        }
        let mut local: Vec<Option<Matrix>> = Vec::with_capacity(loss.id + 1);
        local.resize_with(loss.id + 1, || None);
        local[loss.id] = Some(Matrix::scalar(1.0));

        for id in (0..=loss.id).rev() {
            let Some(g) = local[id].take() else { continue };
            if !nodes[id].requires_grad {
                continue;
            }
            propagate(&nodes, id, &g, &mut local);
            nodes[id].grad.add_assign(&g);
        }
        Ok(())
    }

    /// Zeros every persistent gradient on the tape.
    pub fn zero_grads(&self) {
        for n in self.nodes.borrow_mut().iter_mut() {
            n.grad.fill(0.0);
        }
    }
}

fn accumulate(local: &mut [Option<Matrix>], id: usize, g: Matrix) {
    match &mut local[id] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn propagate(nodes: &[Node], id: usize, g: &Matrix, local: &mut [Option<Matrix>]) {
    let val = |i: usize| &nodes[i].value;
    let wants = |i: usize| nodes[i].requires_grad;
    match &nodes[id].op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            if wants(*a) {
                accumulate(local, *a, g.matmul_nt(val(*b)).expect("shape checked"));
            }
            if wants(*b) {
                accumulate(local, *b, val(*a).matmul_tn(g).expect("shape checked"));
            }
        }
        Op::Add(a, b) => {
            if wants(*a) {
                accumulate(local, *a, g.clone());
            }
            if wants(*b) {
                accumulate(local, *b, g.clone());
            }
        }
        Op::AddRow(a, bias) => {
            if wants(*a) {
                accumulate(local, *a, g.clone());
            }
            if wants(*bias) {
                let mut gb = Matrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (o, v) in gb.data_mut().iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                accumulate(local, *bias, gb);
            }
        }
        Op::Sub(a, b) => {
            if wants(*a) {
                accumulate(local, *a, g.clone());
            }
            if wants(*b) {
                accumulate(local, *b, g.map(|v| -v));
            }
        }
        Op::Hadamard(a, b) => {
            if wants(*a) {
                accumulate(local, *a, g.zip_map(val(*b), |x, y| x * y));
            }
            if wants(*b) {
                accumulate(local, *b, g.zip_map(val(*a), |x, y| x * y));
            }
        }
        Op::MulCol(a, col) => {
            let (av, cv) = (val(*a), val(*col));
            if wants(*a) {
                let mut ga = g.clone();
                for r in 0..ga.rows() {
                    let s = cv.get(r, 0);
                    ga.row_mut(r).iter_mut().for_each(|v| *v *= s);
                }
                accumulate(local, *a, ga);
            }
            if wants(*col) {
                let mut gc = Matrix::zeros(cv.rows(), 1);
                for r in 0..g.rows() {
                    let dot: f64 = g.row(r).iter().zip(av.row(r)).map(|(x, y)| x * y).sum();
                    gc.set(r, 0, dot);
                }
                accumulate(local, *col, gc);
            }
        }
        Op::Div(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            if wants(*a) {
                accumulate(local, *a, g.zip_map(bv, |x, y| x / y));
            }
            if wants(*b) {
                let mut gb = g.zip_map(av, |x, y| x * y);
                for (o, y) in gb.data_mut().iter_mut().zip(bv.data()) {
                    *o = -*o / (y * y);
                }
                accumulate(local, *b, gb);
            }
        }
        Op::Scale(a, s) => {
            if wants(*a) {
                let s = *s;
                accumulate(local, *a, g.map(|v| v * s));
            }
        }
        Op::Relu(a) => {
            if wants(*a) {
                accumulate(local, *a, g.zip_map(val(*a), |x, y| if y > 0.0 { x } else { 0.0 }));
            }
        }
        Op::SoftmaxRows(a) => {
            if wants(*a) {
                // dL/dz = y ⊙ (g - <g, y>)
                let y = &nodes[id].value;
                let mut ga = Matrix::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, &yv), &gv) in ga.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *o = yv * (gv - dot);
                    }
                }
                accumulate(local, *a, ga);
            }
        }
        Op::Log(a) => {
            if wants(*a) {
                accumulate(local, *a, g.zip_map(val(*a), |x, y| x / y));
            }
        }
        Op::Exp(a) => {
            if wants(*a) {
                accumulate(local, *a, g.zip_map(&nodes[id].value, |x, y| x * y));
            }
        }
        Op::ClampMin(a, floor) => {
            if wants(*a) {
                let floor = *floor;
                accumulate(local, *a, g.zip_map(val(*a), |x, y| if y > floor { x } else { 0.0 }));
            }
        }
        Op::Sum(a) => {
            if wants(*a) {
                let (r, c) = val(*a).shape();
                accumulate(local, *a, Matrix::filled(r, c, g.get(0, 0)));
            }
        }
        Op::SumRows(a) => {
            if wants(*a) {
                let (r, c) = val(*a).shape();
                let mut ga = Matrix::zeros(r, c);
                for i in 0..r {
                    ga.row_mut(i).copy_from_slice(g.row(0));
                }
                accumulate(local, *a, ga);
            }
        }
        Op::ConcatRows(parts) => {
            let mut offset = 0;
            for &p in parts {
                let (r, c) = val(p).shape();
                if wants(p) {
                    let data = g.data()[offset * c..(offset + r) * c].to_vec();
                    accumulate(local, p, Matrix::new(r, c, data).expect("shape checked"));
                }
                offset += r;
            }
        }
        Op::Column(a, j) => {
            if wants(*a) {
                let (r, c) = val(*a).shape();
                let mut ga = Matrix::zeros(r, c);
                for i in 0..r {
                    ga.set(i, *j, g.get(i, 0));
                }
                accumulate(local, *a, ga);
            }
        }
        Op::Pick(a, idx) => {
            if wants(*a) {
                let (r, c) = val(*a).shape();
                let mut ga = Matrix::zeros(r, c);
                for (i, &j) in idx.iter().enumerate() {
                    ga.set(i, j, g.get(i, 0));
                }
                accumulate(local, *a, ga);
            }
        }
        Op::Mix(w, cands) => {
            if wants(*w) {
                let (r, n) = val(*w).shape();
                let mut gw = Matrix::zeros(r, n);
                for (a, cand) in cands.iter().enumerate() {
                    for i in 0..r {
                        let dot: f64 = g.row(i).iter().zip(cand.row(i)).map(|(x, y)| x * y).sum();
                        gw.set(i, a, dot);
                    }
                }
                accumulate(local, *w, gw);
            }
        }
        Op::StraightThrough(a) | Op::GradOnly(a) => {
            if wants(*a) {
                accumulate(local, *a, g.clone());
            }
        }
    }
}

fn same_shape(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn node(&self) -> Ref<'t, Node> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id])
    }

    pub fn value(&self) -> Ref<'t, Matrix> {
        Ref::map(self.node(), |n| &n.value)
    }

    pub fn grad(&self) -> Ref<'t, Matrix> {
        Ref::map(self.node(), |n| &n.grad)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value().shape()
    }

    pub fn requires_grad(&self) -> bool {
        self.node().requires_grad
    }

    /// Value of a 1x1 node.
    pub fn item(&self) -> f64 {
        self.value().get(0, 0)
    }

    fn unary(self, name: &'static str, op: Op, value: Matrix) -> Result<Var<'t>> {
        let rg = self.requires_grad();
        self.tape.push(value, op, rg, name)
    }

    fn binary(self, other: Var<'t>, name: &'static str, op: Op, value: Matrix) -> Result<Var<'t>> {
        let rg = self.tape.needs(&[self.id, other.id]);
        self.tape.push(value, op, rg, name)
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        let v = self.value().matmul(&other.value())?;
        self.binary(other, "matmul", Op::MatMul(self.id, other.id), v)
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        let v = {
            let (a, b) = (self.value(), other.value());
            same_shape("add", &a, &b)?;
            a.zip_map(&b, |x, y| x + y)
        };
        self.binary(other, "add", Op::Add(self.id, other.id), v)
    }

    /// Adds a `1 x cols` row to every row.
    pub fn add_row(self, bias: Var<'t>) -> Result<Var<'t>> {
        let v = {
            let (a, b) = (self.value(), bias.value());
            if b.rows() != 1 || b.cols() != a.cols() {
                return Err(Error::ShapeMismatch {
                    op: "add_row",
                    left: a.shape(),
                    right: b.shape(),
                });
            }
            let mut out = a.clone();
            for r in 0..out.rows() {
                for (o, x) in out.row_mut(r).iter_mut().zip(b.row(0)) {
                    *o += x;
                }
            }
            out
        };
        self.binary(bias, "add_row", Op::AddRow(self.id, bias.id), v)
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        let v = {
            let (a, b) = (self.value(), other.value());
            same_shape("sub", &a, &b)?;
            a.zip_map(&b, |x, y| x - y)
        };
        self.binary(other, "sub", Op::Sub(self.id, other.id), v)
    }

    pub fn hadamard(self, other: Var<'t>) -> Result<Var<'t>> {
        let v = {
            let (a, b) = (self.value(), other.value());
            same_shape("hadamard", &a, &b)?;
            a.zip_map(&b, |x, y| x * y)
        };
        self.binary(other, "hadamard", Op::Hadamard(self.id, other.id), v)
    }

    /// Scales row `i` by `col[i]` where `col` is `rows x 1`.
    pub fn mul_col(self, col: Var<'t>) -> Result<Var<'t>> {
        let v = {
            let (a, c) = (self.value(), col.value());
            if c.cols() != 1 || c.rows() != a.rows() {
                return Err(Error::ShapeMismatch {
                    op: "mul_col",
                    left: a.shape(),
                    right: c.shape(),
                });
            }
            let mut out = a.clone();
            for r in 0..out.rows() {
                let s = c.get(r, 0);
                out.row_mut(r).iter_mut().for_each(|v| *v *= s);
            }
            out
        };
        self.binary(col, "mul_col", Op::MulCol(self.id, col.id), v)
    }

    /// Elementwise quotient.
    pub fn div(self, other: Var<'t>) -> Result<Var<'t>> {
        let v = {
            let (a, b) = (self.value(), other.value());
            same_shape("div", &a, &b)?;
            a.zip_map(&b, |x, y| x / y)
        };
        self.binary(other, "div", Op::Div(self.id, other.id), v)
    }

    pub fn scale(self, s: f64) -> Result<Var<'t>> {
        let v = self.value().map(|x| x * s);
        self.unary("scale", Op::Scale(self.id, s), v)
    }

    pub fn relu(self) -> Result<Var<'t>> {
        let v = self.value().map(|x| x.max(0.0));
        self.unary("relu", Op::Relu(self.id), v)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(self) -> Result<Var<'t>> {
        let v = softmax_rows(&self.value());
        self.unary("softmax_rows", Op::SoftmaxRows(self.id), v)
    }

    pub fn log(self) -> Result<Var<'t>> {
        let v = {
            let a = self.value();
            if let Some(&bad) = a.data().iter().find(|&&x| x <= 0.0) {
                return Err(Error::NonPositiveLog(bad));
            }
            a.map(f64::ln)
        };
        self.unary("log", Op::Log(self.id), v)
    }

    pub fn exp(self) -> Result<Var<'t>> {
        let v = self.value().map(f64::exp);
        self.unary("exp", Op::Exp(self.id), v)
    }

    /// `max(x, floor)`; the gradient is zero where the floor is active.
    pub fn clamp_min(self, floor: f64) -> Result<Var<'t>> {
        let v = self.value().map(|x| x.max(floor));
        self.unary("clamp_min", Op::ClampMin(self.id, floor), v)
    }

    /// Sum of all entries, as a 1x1 node.
    pub fn sum(self) -> Result<Var<'t>> {
        let v = Matrix::scalar(self.value().sum());
        self.unary("sum", Op::Sum(self.id), v)
    }

    /// Column sums, as a `1 x cols` node.
    pub fn sum_rows(self) -> Result<Var<'t>> {
        let v = {
            let a = self.value();
            let mut out = Matrix::zeros(1, a.cols());
            for r in 0..a.rows() {
                for (o, x) in out.data_mut().iter_mut().zip(a.row(r)) {
                    *o += x;
                }
            }
            out
        };
        self.unary("sum_rows", Op::SumRows(self.id), v)
    }

    /// Column `j` as a `rows x 1` node.
    pub fn column(self, j: usize) -> Result<Var<'t>> {
        let v = {
            let a = self.value();
            if j >= a.cols() {
                return Err(Error::ShapeMismatch {
                    op: "column",
                    left: a.shape(),
                    right: (1, j + 1),
                });
            }
            let data = (0..a.rows()).map(|r| a.get(r, j)).collect();
            Matrix::new(a.rows(), 1, data)?
        };
        self.unary("column", Op::Column(self.id, j), v)
    }

    /// Entry `idx[i]` of each row `i`, as a `rows x 1` node.
    pub fn pick(self, idx: &[usize]) -> Result<Var<'t>> {
        let v = {
            let a = self.value();
            if idx.len() != a.rows() || idx.iter().any(|&j| j >= a.cols()) {
                return Err(Error::ShapeMismatch {
                    op: "pick",
                    left: a.shape(),
                    right: (idx.len(), 1),
                });
            }
            let data = idx.iter().enumerate().map(|(r, &j)| a.get(r, j)).collect();
            Matrix::new(a.rows(), 1, data)?
        };
        self.unary("pick", Op::Pick(self.id, idx.to_vec()), v)
    }

    /// Row-wise mixture `out[i] = Σ_a self[i, a] · candidates[a][i]`.
    ///
    /// `self` is `rows x n`; each candidate is a constant `rows x f` matrix.
    pub fn mix(self, candidates: Vec<Matrix>) -> Result<Var<'t>> {
        let v = {
            let w = self.value();
            if candidates.len() != w.cols() {
                return Err(Error::ShapeMismatch {
                    op: "mix",
                    left: w.shape(),
                    right: (candidates.len(), 0),
                });
            }
            let f = candidates[0].cols();
            for c in &candidates {
                if c.shape() != (w.rows(), f) {
                    return Err(Error::ShapeMismatch {
                        op: "mix",
                        left: (w.rows(), f),
                        right: c.shape(),
                    });
                }
            }
            let mut out = Matrix::zeros(w.rows(), f);
            for (a, c) in candidates.iter().enumerate() {
                for i in 0..w.rows() {
                    let s = w.get(i, a);
                    for (o, x) in out.row_mut(i).iter_mut().zip(c.row(i)) {
                        *o += s * x;
                    }
                }
            }
            out
        };
        self.unary("mix", Op::Mix(self.id, candidates), v)
    }

    /// Forward value `hard`, backward identity into `self`.
    pub fn straight_through(self, hard: Matrix) -> Result<Var<'t>> {
        same_shape("straight_through", &self.value(), &hard)?;
        self.unary("straight_through", Op::StraightThrough(self.id), hard)
    }

    /// Forward value zero, backward identity into `self`; equals
    /// `self - stop_gradient(self)`.
    pub fn grad_only(self) -> Result<Var<'t>> {
        let (r, c) = self.shape();
        self.unary("grad_only", Op::GradOnly(self.id), Matrix::zeros(r, c))
    }

    /// A gradient-free copy of this node.
    pub fn detach(self) -> Var<'t> {
        let v = self.value().clone();
        self.tape.constant(v)
    }
}

/// Stacks nodes vertically.
pub fn concat_rows<'t>(parts: &[Var<'t>]) -> Result<Var<'t>> {
    let first = parts.first().ok_or(Error::EmptyMatrix { rows: 0, cols: 0 })?;
    let tape = first.tape;
    let cols = first.shape().1;
    let mut data = Vec::new();
    let mut rows = 0;
    for p in parts {
        let v = p.value();
        if v.cols() != cols {
            return Err(Error::ShapeMismatch {
                op: "concat_rows",
                left: (rows, cols),
                right: v.shape(),
            });
        }
        data.extend_from_slice(v.data());
        rows += v.rows();
    }
    let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
    let rg = tape.needs(&ids);
    tape.push(Matrix::new(rows, cols, data)?, Op::ConcatRows(ids), rg, "concat_rows")
}

/// Row-wise softmax of a plain matrix.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    out
}
