//! Matrix-valued reverse-mode differentiation.
//!
//! A [`Tape`] records every operation in evaluation order, so node ids are a
//! topological order by construction. [`Tape::backward`] sweeps the tape in
//! reverse and returns one gradient per node.
//!
//! Leaves may borrow their value (parameters during training) or own it
//! (constants such as embedded token sequences).

use std::borrow::Cow;

use super::matrix::{max_pool_with_argmax, softmax_into, Matrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    /// `aᵀ · b`
    TMatMul(NodeId, NodeId),
    /// `a · bᵀ`
    MatMulT(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    /// Adds a d×1 column to every column of a d×n matrix.
    AddColumn(NodeId, NodeId),
    Tanh(NodeId),
    SoftmaxRows(NodeId),
    MaxPoolColumns { input: NodeId, argmax: Vec<usize> },
    ConcatRows(Vec<NodeId>),
    /// Output column i is input column i + offset, zero outside the range.
    ShiftColumns { input: NodeId, offset: isize },
    MeanColumns(NodeId),
    Sum(NodeId),
    Scale(NodeId, f64),
    /// `-ln(max(p[index], floor))` over a 1×k probability row.
    NegLogPick { probs: NodeId, index: usize, clamped: bool },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::TMatMul(..) => "t_matmul",
            Op::MatMulT(..) => "matmul_t",
            Op::Transpose(_) => "transpose",
            Op::Add(..) => "add",
            Op::AddColumn(..) => "add_column",
            Op::Tanh(_) => "tanh",
            Op::SoftmaxRows(_) => "softmax_rows",
            Op::MaxPoolColumns { .. } => "max_pool_columns",
            Op::ConcatRows(_) => "concat_rows",
            Op::ShiftColumns { .. } => "shift_columns",
            Op::MeanColumns(_) => "mean_columns",
            Op::Sum(_) => "sum",
            Op::Scale(..) => "scale",
            Op::NegLogPick { .. } => "neg_log_pick",
        }
    }
}

struct Node<'a> {
    op: Op,
    value: Cow<'a, Matrix>,
}

#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

/// Gradients of a scalar with respect to every node of a tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Matrix>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> &Matrix {
        &self.grads[id.0]
    }

    pub fn take(&mut self, id: NodeId) -> Matrix {
        std::mem::replace(&mut self.grads[id.0], Matrix::zeros(0, 0))
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Matrix) -> Result<NodeId> {
        let value = value.ensure_finite(op.name())?;
        self.nodes.push(Node {
            op,
            value: Cow::Owned(value),
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn leaf(&mut self, value: Matrix) -> Result<NodeId> {
        self.push(Op::Leaf, value)
    }

    /// Leaf that borrows its value, avoiding a copy of large parameters.
    pub fn leaf_ref(&mut self, value: &'a Matrix) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite("leaf"));
        }
        self.nodes.push(Node {
            op: Op::Leaf,
            value: Cow::Borrowed(value),
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        self.push(Op::MatMul(a, b), v)
    }

    pub fn t_matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).t_matmul(self.value(b))?;
        self.push(Op::TMatMul(a, b), v)
    }

    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul_t(self.value(b))?;
        self.push(Op::MatMulT(a, b), v)
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a).transpose();
        self.push(Op::Transpose(a), v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).add(self.value(b))?;
        self.push(Op::Add(a, b), v)
    }

    pub fn add_column(&mut self, m: NodeId, col: NodeId) -> Result<NodeId> {
        let (mv, cv) = (self.value(m), self.value(col));
        if cv.shape() != (mv.rows(), 1) {
            return Err(Error::Shape {
                op: "add_column",
                left: mv.shape(),
                right: cv.shape(),
            });
        }
        let mut out = mv.clone();
        let cols = out.cols();
        for r in 0..out.rows() {
            let b = cv.get(r, 0);
            for v in &mut out.as_mut_slice()[r * cols..(r + 1) * cols] {
                *v += b;
            }
        }
        self.push(Op::AddColumn(m, col), out)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let x = self.value(a);
        if x.cols() == 0 {
            return Err(Error::Empty("softmax over zero columns"));
        }
        let mut out = Matrix::zeros(x.rows(), x.cols());
        let cols = x.cols();
        for r in 0..x.rows() {
            softmax_into(x.row(r), &mut out.as_mut_slice()[r * cols..(r + 1) * cols]);
        }
        self.push(Op::SoftmaxRows(a), out)
    }

    pub fn max_pool_columns(&mut self, a: NodeId) -> Result<NodeId> {
        let (v, argmax) = max_pool_with_argmax(self.value(a))?;
        self.push(Op::MaxPoolColumns { input: a, argmax }, v)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = parts.first().ok_or(Error::Empty("concat_rows"))?;
        let cols = self.value(*first).cols();
        let mut data = Vec::new();
        for &p in parts {
            let v = self.value(p);
            if v.cols() != cols {
                return Err(Error::Shape {
                    op: "concat_rows",
                    left: self.value(*first).shape(),
                    right: v.shape(),
                });
            }
            data.extend_from_slice(v.as_slice());
        }
        let rows = data.len() / cols.max(1);
        let v = Matrix::from_vec(rows, cols, data)?;
        self.push(Op::ConcatRows(parts.to_vec()), v)
    }

    pub fn shift_columns(&mut self, a: NodeId, offset: isize) -> Result<NodeId> {
        let x = self.value(a);
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for j in 0..x.cols() {
            let src = j as isize + offset;
            if src < 0 || src >= x.cols() as isize {
                continue;
            }
            for r in 0..x.rows() {
                out.set(r, j, x.get(r, src as usize));
            }
        }
        self.push(Op::ShiftColumns { input: a, offset }, out)
    }

    pub fn mean_columns(&mut self, a: NodeId) -> Result<NodeId> {
        let x = self.value(a);
        if x.cols() == 0 {
            return Err(Error::Empty("mean over zero columns"));
        }
        let n = x.cols() as f64;
        let v = Matrix::column((0..x.rows()).map(|r| x.row(r).iter().sum::<f64>() / n).collect());
        self.push(Op::MeanColumns(a), v)
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let v = Matrix::scalar(self.value(a).sum());
        self.push(Op::Sum(a), v)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        let v = self.value(a).scale(factor);
        self.push(Op::Scale(a, factor), v)
    }

    /// Negative log of entry `index` of a 1×k probability row, floored at `floor`.
    pub fn neg_log_pick(&mut self, probs: NodeId, index: usize, floor: f64) -> Result<NodeId> {
        let p = self.value(probs);
        if p.rows() != 1 || index >= p.cols() {
            return Err(Error::Shape {
                op: "neg_log_pick",
                left: p.shape(),
                right: (1, index + 1),
            });
        }
        let raw = p.get(0, index);
        let clamped = raw < floor;
        let v = Matrix::scalar(-raw.max(floor).ln());
        self.push(
            Op::NegLogPick {
                probs,
                index,
                clamped,
            },
            v,
        )
    }

    /// Argmax choices of every max-pool node, in tape order. Two evaluations
    /// with equal signatures lie on the same smooth piece of the function.
    pub fn pooling_signature(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match &n.op {
                Op::MaxPoolColumns { argmax, .. } => Some(argmax.as_slice()),
                _ => None,
            })
            .flatten()
            .copied()
            .collect()
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::Shape {
                op: "backward (loss must be 1x1)",
                left: lv.shape(),
                right: (1, 1),
            });
        }
        let mut grads: Vec<Matrix> = self
            .nodes
            .iter()
            .map(|n| Matrix::zeros(n.value.rows(), n.value.cols()))
            .collect();
        grads[loss.0] = Matrix::scalar(1.0);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let g = std::mem::replace(&mut grads[idx], Matrix::zeros(0, 0));
            if g.as_slice().iter().all(|&v| v == 0.0) {
                grads[idx] = g;
                continue;
            }
            self.propagate(&node.op, &node.value, &g, &mut grads)?;
            grads[idx] = g;
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, op: &Op, out: &Matrix, g: &Matrix, grads: &mut [Matrix]) -> Result<()> {
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                // dA = G·Bᵀ, dB = Aᵀ·G
                grads[a.0].add_assign(&g.matmul_t(bv)?);
                grads[b.0].add_assign(&av.t_matmul(g)?);
            }
            Op::TMatMul(a, b) => {
                // out = Aᵀ·B: dA = B·Gᵀ, dB = A·G
                let (av, bv) = (self.value(*a), self.value(*b));
                grads[a.0].add_assign(&bv.matmul_t(g)?);
                grads[b.0].add_assign(&av.matmul(g)?);
            }
            Op::MatMulT(a, b) => {
                // out = A·Bᵀ: dA = G·B, dB = Gᵀ·A
                let (av, bv) = (self.value(*a), self.value(*b));
                grads[a.0].add_assign(&g.matmul(bv)?);
                grads[b.0].add_assign(&g.t_matmul(av)?);
            }
            Op::Transpose(a) => {
                grads[a.0].add_assign(&g.transpose());
            }
            Op::Add(a, b) => {
                grads[a.0].add_assign(g);
                grads[b.0].add_assign(g);
            }
            Op::AddColumn(m, col) => {
                grads[m.0].add_assign(g);
                let cols = g.cols();
                let cg = &mut grads[col.0];
                for r in 0..g.rows() {
                    let s: f64 = g.as_slice()[r * cols..(r + 1) * cols].iter().sum();
                    cg.as_mut_slice()[r] += s;
                }
            }
            Op::Tanh(a) => {
                let ga = grads[a.0].as_mut_slice();
                for ((d, &y), &gv) in ga.iter_mut().zip(out.as_slice()).zip(g.as_slice()) {
                    *d += gv * (1.0 - y * y);
                }
            }
            Op::SoftmaxRows(a) => {
                let cols = out.cols();
                let ga = grads[a.0].as_mut_slice();
                for r in 0..out.rows() {
                    let y = out.row(r);
                    let gr = g.row(r);
                    let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..cols {
                        ga[r * cols + j] += y[j] * (gr[j] - dot);
                    }
                }
            }
            Op::MaxPoolColumns { input, argmax } => {
                let gi = &mut grads[input.0];
                for (r, &j) in argmax.iter().enumerate() {
                    let v = gi.get(r, j) + g.get(r, 0);
                    gi.set(r, j, v);
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = self.value(*p).len();
                    let slice = &g.as_slice()[offset..offset + n];
                    for (d, &s) in grads[p.0].as_mut_slice().iter_mut().zip(slice) {
                        *d += s;
                    }
                    offset += n;
                }
            }
            Op::ShiftColumns { input, offset } => {
                let gi = &mut grads[input.0];
                let n = g.cols() as isize;
                for j in 0..g.cols() {
                    let src = j as isize + offset;
                    if src < 0 || src >= n {
                        continue;
                    }
                    for r in 0..g.rows() {
                        let v = gi.get(r, src as usize) + g.get(r, j);
                        gi.set(r, src as usize, v);
                    }
                }
            }
            Op::MeanColumns(a) => {
                let gi = &mut grads[a.0];
                let n = gi.cols();
                let inv = 1.0 / n as f64;
                for r in 0..gi.rows() {
                    let gv = g.get(r, 0) * inv;
                    for v in &mut gi.as_mut_slice()[r * n..(r + 1) * n] {
                        *v += gv;
                    }
                }
            }
            Op::Sum(a) => {
                let gv = g.get(0, 0);
                for d in grads[a.0].as_mut_slice() {
                    *d += gv;
                }
            }
            Op::Scale(a, factor) => {
                for (d, &gv) in grads[a.0].as_mut_slice().iter_mut().zip(g.as_slice()) {
                    *d += gv * factor;
                }
            }
            Op::NegLogPick {
                probs,
                index,
                clamped,
            } => {
                if !clamped {
                    let p = self.value(*probs).get(0, *index);
                    let gi = &mut grads[probs.0];
                    let v = gi.get(0, *index) - g.get(0, 0) / p;
                    gi.set(0, *index, v);
                }
            }
        }
        Ok(())
    }
}
