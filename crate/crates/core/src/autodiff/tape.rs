//! Append-only differentiation graph.
//!
//! Every operation on a [`Var`] records a node holding its value and the ids
//! of its parents. Parents always have smaller ids, so the node list is a
//! topological order. [`Tape::gradient`] walks that order backwards and
//! records the vector-Jacobian products as ordinary nodes, which means a
//! gradient can itself be differentiated again.

use std::cell::RefCell;
use std::rc::Rc;

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Elu,
    Tanh,
    Relu,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul { a: usize, b: usize, ta: bool, tb: bool },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Sum(usize),
    ExpandScalar(usize),
    SumRows(usize),
    ExpandRows(usize),
    Concat { parts: Vec<usize>, axis: usize },
    Slice { a: usize, axis: usize, start: usize },
    Pad { a: usize, axis: usize, start: usize },
    Transpose(usize),
    Reshape(usize),
    Act(usize, Activation),
    Square(usize),
    Exp(usize),
    Log(usize),
    Recip(usize),
    LogSumExp(usize),
    Gather { a: usize, index: Rc<Vec<usize>> },
    ScatterAdd { a: usize, index: Rc<Vec<usize>> },
}

impl Op {
    fn parents(&self) -> Vec<usize> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul { a, b, .. } => vec![*a, *b],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Concat { parts, .. } => parts.clone(),
            Op::Scale(a, _)
            | Op::Sum(a)
            | Op::ExpandScalar(a)
            | Op::SumRows(a)
            | Op::ExpandRows(a)
            | Op::Slice { a, .. }
            | Op::Pad { a, .. }
            | Op::Transpose(a)
            | Op::Reshape(a)
            | Op::Act(a, _)
            | Op::Square(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Recip(a)
            | Op::LogSumExp(a)
            | Op::Gather { a, .. }
            | Op::ScatterAdd { a, .. } => vec![*a],
        }
    }

    fn has_parent_in(&self, flags: &[bool]) -> bool {
        match self {
            Op::Leaf => false,
            Op::MatMul { a, b, .. } | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => {
                flags[*a] || flags[*b]
            }
            Op::Concat { parts, .. } => parts.iter().any(|p| flags[*p]),
            _ => flags[self.parents()[0]],
        }
    }
}

struct Node {
    op: Op,
    value: Rc<Tensor>,
}

/// A single-writer differentiation graph.
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
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Error {
    Error::Shape {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records an input. Inputs and constants are the same kind of node:
    /// whether a leaf is differentiated is decided by the `wrt` list passed
    /// to [`Tape::gradient`].
    pub fn var(&self, value: Tensor) -> Var<'_> {
        self.push_unchecked(Op::Leaf, value)
    }

    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.var(value)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.var(Tensor::scalar(value))
    }

    fn push_unchecked(&self, op: Op, value: Tensor) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            op,
            value: Rc::new(value),
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn push(&self, name: &'static str, op: Op, value: Tensor) -> Result<Var<'_>> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        Ok(self.push_unchecked(op, value))
    }

    fn value(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    /// Reverse-mode derivative of the scalar `output` with respect to each
    /// entry of `wrt`.
    ///
    /// The returned gradients are recorded on this tape, so they can be
    /// differentiated again. A `wrt` entry that `output` does not depend on
    /// gets an all-zero constant of the matching shape.
    pub fn gradient<'t>(&'t self, output: Var<'t>, wrt: &[Var<'t>]) -> Result<Vec<Var<'t>>> {
        if output.numel() != 1 {
            return Err(Error::InvalidArgument(format!(
                "gradient needs a scalar output, got shape {:?}",
                output.shape()
            )));
        }
        let end = output.id + 1;
        let zeros = |w: &Var<'t>| self.constant(Tensor::zeros(&w.shape()));
        let Some(start) = wrt.iter().map(|w| w.id).filter(|&id| id < end).min() else {
            return Ok(wrt.iter().map(zeros).collect());
        };

        let mut depends = vec![false; end];
        for w in wrt {
            if w.id < end {
                depends[w.id] = true;
            }
        }
        {
            let nodes = self.nodes.borrow();
            for id in start..end {
                if !depends[id] && nodes[id].op.has_parent_in(&depends) {
                    depends[id] = true;
                }
            }
        }
        if !depends[output.id] {
            return Ok(wrt.iter().map(zeros).collect());
        }

        let mut adjoint: Vec<Option<Var<'t>>> = vec![None; end];
        adjoint[output.id] = Some(self.constant(Tensor::ones(&output.shape())));
        for id in (start..end).rev() {
            let Some(g) = adjoint[id] else { continue };
            let op = self.nodes.borrow()[id].op.clone();
            if matches!(op, Op::Leaf) {
                continue;
            }
            let node = Var { tape: self, id };
            for (parent, contribution) in self.vjp(node, &op, g, &depends)? {
                adjoint[parent] = Some(match adjoint[parent] {
                    Some(acc) => acc.add(contribution)?,
                    None => contribution,
                });
            }
        }
        Ok(wrt
            .iter()
            .map(|w| {
                if w.id < end {
                    adjoint[w.id].unwrap_or_else(|| zeros(w))
                } else {
                    zeros(w)
                }
            })
            .collect())
    }

    /// Same as [`Tape::gradient`] but returns plain tensors and records
    /// nothing, for derivatives that will not be differentiated again.
    pub fn gradient_values<'t>(&'t self, output: Var<'t>, wrt: &[Var<'t>]) -> Result<Vec<Tensor>> {
        if output.numel() != 1 {
            return Err(Error::InvalidArgument(format!(
                "gradient needs a scalar output, got shape {:?}",
                output.shape()
            )));
        }
        let end = output.id + 1;
        let nodes = self.nodes.borrow();
        let zeros = |w: &Var<'t>| Tensor::zeros(nodes[w.id].value.shape());
        let Some(start) = wrt.iter().map(|w| w.id).filter(|&id| id < end).min() else {
            return Ok(wrt.iter().map(zeros).collect());
        };
        let mut depends = vec![false; end];
        for w in wrt {
            if w.id < end {
                depends[w.id] = true;
            }
        }
        for id in start..end {
            if !depends[id] && nodes[id].op.has_parent_in(&depends) {
                depends[id] = true;
            }
        }
        if !depends[output.id] {
            return Ok(wrt.iter().map(zeros).collect());
        }

        let mut adjoint: Vec<Option<Tensor>> = vec![None; end];
        adjoint[output.id] = Some(Tensor::ones(nodes[output.id].value.shape()));
        for id in (start..end).rev() {
            let Some(g) = adjoint[id].take() else { continue };
            let node = &nodes[id];
            if matches!(node.op, Op::Leaf) {
                adjoint[id] = Some(g);
                continue;
            }
            for (parent, contribution) in vjp_values(&nodes, node, &g, &depends) {
                match &mut adjoint[parent] {
                    Some(acc) => acc
                        .data_mut()
                        .iter_mut()
                        .zip(contribution.data())
                        .for_each(|(a, c)| *a += c),
                    slot => *slot = Some(contribution),
                }
            }
        }
        let out: Vec<Tensor> = wrt
            .iter()
            .map(|w| {
                if w.id < end {
                    adjoint[w.id].take().unwrap_or_else(|| zeros(w))
                } else {
                    zeros(w)
                }
            })
            .collect();
        if out.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite { op: "gradient" });
        }
        Ok(out)
    }

    /// Vector-Jacobian products of one node, expressed with recorded ops.
    fn vjp<'t>(
        &'t self,
        out: Var<'t>,
        op: &Op,
        g: Var<'t>,
        depends: &[bool],
    ) -> Result<Vec<(usize, Var<'t>)>> {
        let v = |id: usize| Var { tape: self, id };
        let mut res = Vec::with_capacity(2);
        match *op {
            Op::Leaf => {}
            Op::MatMul { a, b, ta, tb } => {
                if depends[a] {
                    let da = if ta {
                        v(b).matmul_t(g, tb, true)?
                    } else {
                        g.matmul_t(v(b), false, !tb)?
                    };
                    res.push((a, da));
                }
                if depends[b] {
                    let db = if tb {
                        g.matmul_t(v(a), true, ta)?
                    } else {
                        v(a).matmul_t(g, !ta, false)?
                    };
                    res.push((b, db));
                }
            }
            Op::Add(a, b) => {
                if depends[a] {
                    res.push((a, g));
                }
                if depends[b] {
                    res.push((b, g));
                }
            }
            Op::Sub(a, b) => {
                if depends[a] {
                    res.push((a, g));
                }
                if depends[b] {
                    res.push((b, g.scale(-1.0)?));
                }
            }
            Op::Mul(a, b) => {
                if depends[a] {
                    res.push((a, g.mul(v(b))?));
                }
                if depends[b] {
                    res.push((b, g.mul(v(a))?));
                }
            }
            Op::Scale(a, c) => res.push((a, g.scale(c)?)),
            Op::Sum(a) => res.push((a, g.expand_scalar(&v(a).shape())?)),
            Op::ExpandScalar(a) => res.push((a, g.sum()?.reshape(&v(a).shape())?)),
            Op::SumRows(a) => res.push((a, g.expand_rows(v(a).shape()[0])?)),
            Op::ExpandRows(a) => res.push((a, g.sum_rows()?)),
            Op::Concat { ref parts, axis } => {
                let mut offset = 0;
                for &p in parts {
                    let len = v(p).shape()[axis];
                    if depends[p] {
                        res.push((p, g.slice(axis, offset, len)?));
                    }
                    offset += len;
                }
            }
            Op::Slice { a, axis, start } => {
                let full = v(a).shape()[axis];
                res.push((a, g.pad(axis, start, full)?));
            }
            Op::Pad { a, axis, start } => {
                let len = v(a).shape()[axis];
                res.push((a, g.slice(axis, start, len)?));
            }
            Op::Transpose(a) => res.push((a, g.transpose()?)),
            Op::Reshape(a) => res.push((a, g.reshape(&v(a).shape())?)),
            Op::Act(a, kind) => {
                let x = v(a);
                let xv = x.value();
                let d = match kind {
                    Activation::Elu => {
                        let pos = self.constant(xv.map(|t| if t > 0.0 { 1.0 } else { 0.0 }));
                        let neg = self.constant(xv.map(|t| if t > 0.0 { 0.0 } else { 1.0 }));
                        pos.add(neg.mul(x.mul(neg)?.exp()?)?)?
                    }
                    Activation::Tanh => {
                        let one = self.constant(Tensor::ones(xv.shape()));
                        one.sub(out.square()?)?
                    }
                    Activation::Relu => {
                        self.constant(xv.map(|t| if t > 0.0 { 1.0 } else { 0.0 }))
                    }
                };
                res.push((a, g.mul(d)?));
            }
            Op::Square(a) => res.push((a, g.mul(v(a).scale(2.0)?)?)),
            Op::Exp(a) => res.push((a, g.mul(out)?)),
            Op::Log(a) => res.push((a, g.mul(v(a).recip()?)?)),
            Op::Recip(a) => res.push((a, g.mul(out.square()?)?.scale(-1.0)?)),
            Op::LogSumExp(a) => {
                let x = v(a);
                let shape = x.shape();
                let soft = x.sub(out.expand_scalar(&shape)?)?.exp()?;
                res.push((a, g.expand_scalar(&shape)?.mul(soft)?));
            }
            Op::Gather { a, ref index } => {
                let shape = v(a).shape();
                res.push((a, g.scatter_add_rc(Rc::clone(index), &shape)?));
            }
            Op::ScatterAdd { a, ref index } => {
                let shape = v(a).shape();
                res.push((a, g.gather_rc(Rc::clone(index), &shape)?));
            }
        }
        Ok(res)
    }
}

fn slice_data(a: &Tensor, axis: usize, start: usize, len: usize) -> Tensor {
    let (r, c) = (a.rows(), a.cols());
    if axis == 0 {
        Tensor::from_parts(vec![len, c], a.data()[start * c..(start + len) * c].to_vec())
    } else {
        let mut out = Vec::with_capacity(r * len);
        for i in 0..r {
            out.extend_from_slice(&a.data()[i * c + start..i * c + start + len]);
        }
        Tensor::from_parts(vec![r, len], out)
    }
}

fn pad_data(a: &Tensor, axis: usize, start: usize, full: usize) -> Tensor {
    let (r, c) = (a.rows(), a.cols());
    if axis == 0 {
        let mut out = vec![0.0; full * c];
        out[start * c..(start + r) * c].copy_from_slice(a.data());
        Tensor::from_parts(vec![full, c], out)
    } else {
        let mut out = vec![0.0; r * full];
        for i in 0..r {
            out[i * full + start..i * full + start + c]
                .copy_from_slice(&a.data()[i * c..(i + 1) * c]);
        }
        Tensor::from_parts(vec![r, full], out)
    }
}

fn matmul_data(a: &Tensor, ta: bool, b: &Tensor, tb: bool) -> Tensor {
    let (m, n, data) = gemm(a.data(), (a.rows(), a.cols()), ta, b.data(), (b.rows(), b.cols()), tb);
    Tensor::from_parts(vec![m, n], data)
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_parts(a.shape().to_vec(), data)
}

/// Vector-Jacobian products of one node on plain tensors.
fn vjp_values(nodes: &[Node], node: &Node, g: &Tensor, depends: &[bool]) -> Vec<(usize, Tensor)> {
    let val = |id: usize| &*nodes[id].value;
    let out = &*node.value;
    let mut res = Vec::with_capacity(2);
    match node.op {
        Op::Leaf => {}
        Op::MatMul { a, b, ta, tb } => {
            if depends[a] {
                let da = if ta {
                    matmul_data(val(b), tb, g, true)
                } else {
                    matmul_data(g, false, val(b), !tb)
                };
                res.push((a, da));
            }
            if depends[b] {
                let db = if tb {
                    matmul_data(g, true, val(a), ta)
                } else {
                    matmul_data(val(a), !ta, g, false)
                };
                res.push((b, db));
            }
        }
        Op::Add(a, b) => {
            if depends[a] {
                res.push((a, g.clone()));
            }
            if depends[b] {
                res.push((b, g.clone()));
            }
        }
        Op::Sub(a, b) => {
            if depends[a] {
                res.push((a, g.clone()));
            }
            if depends[b] {
                res.push((b, g.map(|x| -x)));
            }
        }
        Op::Mul(a, b) => {
            if depends[a] {
                res.push((a, zip(g, val(b), |x, y| x * y)));
            }
            if depends[b] {
                res.push((b, zip(g, val(a), |x, y| x * y)));
            }
        }
        Op::Scale(a, c) => res.push((a, g.map(|x| x * c))),
        Op::Sum(a) => res.push((a, Tensor::filled(val(a).shape(), g.item()))),
        Op::ExpandScalar(a) => res.push((a, Tensor::filled(val(a).shape(), g.sum()))),
        Op::SumRows(a) => {
            let m = val(a).shape()[0];
            let mut data = Vec::with_capacity(m * g.numel());
            for _ in 0..m {
                data.extend_from_slice(g.data());
            }
            res.push((a, Tensor::from_parts(val(a).shape().to_vec(), data)));
        }
        Op::ExpandRows(a) => {
            let k = val(a).numel();
            let mut data = vec![0.0; k];
            for row in g.data().chunks_exact(k.max(1)) {
                data.iter_mut().zip(row).for_each(|(d, x)| *d += x);
            }
            res.push((a, Tensor::from_parts(val(a).shape().to_vec(), data)));
        }
        Op::Concat { ref parts, axis } => {
            let mut offset = 0;
            for &p in parts {
                let len = val(p).shape()[axis];
                if depends[p] {
                    res.push((p, slice_data(g, axis, offset, len)));
                }
                offset += len;
            }
        }
        Op::Slice { a, axis, start } => {
            res.push((a, pad_data(g, axis, start, val(a).shape()[axis])));
        }
        Op::Pad { a, axis, start } => {
            res.push((a, slice_data(g, axis, start, val(a).shape()[axis])));
        }
        Op::Transpose(a) => res.push((a, g.transposed())),
        Op::Reshape(a) => res.push((
            a,
            Tensor::from_parts(val(a).shape().to_vec(), g.data().to_vec()),
        )),
        Op::Act(a, kind) => {
            let d = match kind {
                Activation::Elu => zip(g, val(a), |g, x| if x > 0.0 { g } else { g * x.exp() }),
                Activation::Tanh => zip(g, out, |g, y| g * (1.0 - y * y)),
                Activation::Relu => zip(g, val(a), |g, x| if x > 0.0 { g } else { 0.0 }),
            };
            res.push((a, d));
        }
        Op::Square(a) => res.push((a, zip(g, val(a), |g, x| g * 2.0 * x))),
        Op::Exp(a) => res.push((a, zip(g, out, |g, y| g * y))),
        Op::Log(a) => res.push((a, zip(g, val(a), |g, x| g / x))),
        Op::Recip(a) => res.push((a, zip(g, out, |g, y| -g * y * y))),
        Op::LogSumExp(a) => {
            let (g, m) = (g.item(), out.item());
            res.push((a, val(a).map(|x| g * (x - m).exp())));
        }
        Op::Gather { a, ref index } => {
            let mut data = vec![0.0; val(a).numel()];
            for (&i, &x) in index.iter().zip(g.data()) {
                data[i] += x;
            }
            res.push((a, Tensor::from_parts(val(a).shape().to_vec(), data)));
        }
        Op::ScatterAdd { a, ref index } => {
            let data = index.iter().map(|&i| g.data()[i]).collect();
            res.push((a, Tensor::from_parts(val(a).shape().to_vec(), data)));
        }
    }
    res
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn numel(&self) -> usize {
        self.tape.nodes.borrow()[self.id].value.numel()
    }

    /// Value of a single-element variable.
    pub fn item(&self) -> f64 {
        self.value().item()
    }

    /// A new leaf holding this node's current value.
    pub fn detach(&self) -> Var<'t> {
        self.tape.constant((*self.value()).clone())
    }

    fn same_tape(&self, other: &Var<'t>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "variables belong to different tapes"
        );
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.matmul_t(other, false, false)
    }

    /// `op(self) · op(other)` where `op` transposes when the flag is set.
    pub fn matmul_t(self, other: Var<'t>, ta: bool, tb: bool) -> Result<Var<'t>> {
        self.same_tape(&other);
        let a = self.value();
        let b = other.value();
        if a.rank() != 2 || b.rank() != 2 {
            return Err(shape_err("matmul", a.shape(), b.shape()));
        }
        let k_a = if ta { a.rows() } else { a.cols() };
        let k_b = if tb { b.cols() } else { b.rows() };
        if k_a != k_b {
            return Err(shape_err("matmul", a.shape(), b.shape()));
        }
        let (m, n, data) = gemm(
            a.data(),
            (a.rows(), a.cols()),
            ta,
            b.data(),
            (b.rows(), b.cols()),
            tb,
        );
        self.tape.push(
            "matmul",
            Op::MatMul {
                a: self.id,
                b: other.id,
                ta,
                tb,
            },
            Tensor::from_parts(vec![m, n], data),
        )
    }

    fn binary(
        self,
        other: Var<'t>,
        name: &'static str,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var<'t>> {
        self.same_tape(&other);
        let a = self.value();
        let b = other.value();
        if a.shape() != b.shape() {
            return Err(shape_err(name, a.shape(), b.shape()));
        }
        let out = a.zip_map(&b, f)?;
        self.tape.push(name, op, out)
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "add", Op::Add(self.id, other.id), |a, b| a + b)
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "subtract", Op::Sub(self.id, other.id), |a, b| a - b)
    }

    /// Elementwise product.
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "multiply", Op::Mul(self.id, other.id), |a, b| a * b)
    }

    pub fn scale(self, c: f64) -> Result<Var<'t>> {
        let out = self.value().map(|x| x * c);
        self.tape.push("scale", Op::Scale(self.id, c), out)
    }

    /// Sum of all entries as a rank-0 scalar.
    pub fn sum(self) -> Result<Var<'t>> {
        let s = self.value().sum();
        self.tape.push("sum", Op::Sum(self.id), Tensor::scalar(s))
    }

    pub fn mean(self) -> Result<Var<'t>> {
        let n = self.numel().max(1);
        self.sum()?.scale(1.0 / n as f64)
    }

    /// Dot product of two equally shaped variables.
    pub fn dot(self, other: Var<'t>) -> Result<Var<'t>> {
        self.mul(other)?.sum()
    }

    /// Broadcasts a single-element variable to `shape`.
    pub fn expand_scalar(self, shape: &[usize]) -> Result<Var<'t>> {
        let a = self.value();
        if a.numel() != 1 {
            return Err(shape_err("expand-scalar", a.shape(), shape));
        }
        let out = Tensor::filled(shape, a.item());
        self.tape.push("expand-scalar", Op::ExpandScalar(self.id), out)
    }

    /// Column sums of a `[m, k]` matrix, giving `[k]`.
    pub fn sum_rows(self) -> Result<Var<'t>> {
        let a = self.value();
        if a.rank() != 2 {
            return Err(shape_err("sum-rows", a.shape(), &[]));
        }
        let (m, k) = (a.rows(), a.cols());
        let mut out = vec![0.0; k];
        for row in a.data().chunks_exact(k.max(1)).take(m) {
            for (o, x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        self.tape
            .push("sum-rows", Op::SumRows(self.id), Tensor::vector(out))
    }

    /// Repeats a `[k]` vector as the rows of an `[m, k]` matrix.
    pub fn expand_rows(self, m: usize) -> Result<Var<'t>> {
        let a = self.value();
        if a.rank() != 1 {
            return Err(shape_err("expand-rows", a.shape(), &[m]));
        }
        let k = a.numel();
        let mut out = Vec::with_capacity(m * k);
        for _ in 0..m {
            out.extend_from_slice(a.data());
        }
        self.tape.push(
            "expand-rows",
            Op::ExpandRows(self.id),
            Tensor::from_parts(vec![m, k], out),
        )
    }

    /// Adds a `[k]` bias to every row of an `[m, k]` matrix.
    pub fn add_row(self, row: Var<'t>) -> Result<Var<'t>> {
        let m = self.shape()[0];
        self.add(row.expand_rows(m)?)
    }

    /// Multiplies every row of an `[m, k]` matrix elementwise by a `[k]` vector.
    pub fn mul_row(self, row: Var<'t>) -> Result<Var<'t>> {
        let m = self.shape()[0];
        self.mul(row.expand_rows(m)?)
    }

    /// Concatenation of rank-2 variables along `axis` (0 = rows, 1 = columns).
    pub fn concat(parts: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
        let tape = first.tape;
        let values: Vec<Rc<Tensor>> = parts.iter().map(|p| p.value()).collect();
        let base = values[0].shape().to_vec();
        if base.len() != 2 || axis > 1 {
            return Err(shape_err("concat", &base, &[axis]));
        }
        let other = 1 - axis;
        for v in &values[1..] {
            if v.rank() != 2 || v.shape()[other] != base[other] {
                return Err(shape_err("concat", &base, v.shape()));
            }
        }
        let total: usize = values.iter().map(|v| v.shape()[axis]).sum();
        let data = if axis == 0 {
            values.iter().flat_map(|v| v.data().iter().copied()).collect()
        } else {
            let rows = base[0];
            let mut out = Vec::with_capacity(rows * total);
            for i in 0..rows {
                for v in &values {
                    let c = v.cols();
                    out.extend_from_slice(&v.data()[i * c..(i + 1) * c]);
                }
            }
            out
        };
        let shape = if axis == 0 {
            vec![total, base[1]]
        } else {
            vec![base[0], total]
        };
        tape.push(
            "concat",
            Op::Concat {
                parts: parts.iter().map(|p| p.id).collect(),
                axis,
            },
            Tensor::from_parts(shape, data),
        )
    }

    /// `len` rows (axis 0) or columns (axis 1) starting at `start`.
    pub fn slice(self, axis: usize, start: usize, len: usize) -> Result<Var<'t>> {
        let a = self.value();
        if a.rank() != 2 || axis > 1 || start + len > a.shape()[axis] {
            return Err(shape_err("slice", a.shape(), &[axis, start, len]));
        }
        self.tape.push(
            "slice",
            Op::Slice {
                a: self.id,
                axis,
                start,
            },
            slice_data(&a, axis, start, len),
        )
    }

    /// Embeds this matrix into zeros of extent `full` along `axis`, at `start`.
    pub fn pad(self, axis: usize, start: usize, full: usize) -> Result<Var<'t>> {
        let a = self.value();
        if a.rank() != 2 || axis > 1 || start + a.shape()[axis] > full {
            return Err(shape_err("pad", a.shape(), &[axis, start, full]));
        }
        self.tape.push(
            "pad",
            Op::Pad {
                a: self.id,
                axis,
                start,
            },
            pad_data(&a, axis, start, full),
        )
    }

    pub fn transpose(self) -> Result<Var<'t>> {
        let a = self.value();
        if a.rank() != 2 {
            return Err(shape_err("transpose", a.shape(), &[]));
        }
        self.tape
            .push("transpose", Op::Transpose(self.id), a.transposed())
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let out = (*self.value()).clone().reshaped(shape)?;
        self.tape.push("reshape", Op::Reshape(self.id), out)
    }

    pub fn activation(self, kind: Activation) -> Result<Var<'t>> {
        let a = self.value();
        let out = match kind {
            Activation::Elu => a.map(elu),
            Activation::Tanh => a.map(f64::tanh),
            Activation::Relu => a.map(|x| x.max(0.0)),
        };
        let name = match kind {
            Activation::Elu => "elu",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        };
        self.tape.push(name, Op::Act(self.id, kind), out)
    }

    pub fn square(self) -> Result<Var<'t>> {
        let out = self.value().map(|x| x * x);
        self.tape.push("square", Op::Square(self.id), out)
    }

    pub fn exp(self) -> Result<Var<'t>> {
        let out = self.value().map(f64::exp);
        self.tape.push("exponent", Op::Exp(self.id), out)
    }

    pub fn ln(self) -> Result<Var<'t>> {
        let out = self.value().map(f64::ln);
        self.tape.push("logarithm", Op::Log(self.id), out)
    }

    pub fn recip(self) -> Result<Var<'t>> {
        let out = self.value().map(f64::recip);
        self.tape.push("reciprocal", Op::Recip(self.id), out)
    }

    /// `log Σ exp(x)` over all entries, computed with the max shift.
    pub fn logsumexp(self) -> Result<Var<'t>> {
        let a = self.value();
        if a.numel() == 0 {
            return Err(Error::InvalidArgument("logsumexp of an empty tensor".into()));
        }
        let m = a.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = a.data().iter().map(|x| (x - m).exp()).sum();
        self.tape.push(
            "logsumexp",
            Op::LogSumExp(self.id),
            Tensor::scalar(m + s.ln()),
        )
    }

    /// `(M + Mᵀ) / 2` for a square matrix.
    pub fn symmetrize(self) -> Result<Var<'t>> {
        let shape = self.shape();
        if shape.len() != 2 || shape[0] != shape[1] {
            return Err(shape_err("symmetrize", &shape, &[]));
        }
        self.add(self.transpose()?)?.scale(0.5)
    }

    /// Flat gather: `out[m] = self.flat[index[m]]`, reshaped to `shape`.
    pub fn gather(self, index: Vec<usize>, shape: &[usize]) -> Result<Var<'t>> {
        self.gather_rc(Rc::new(index), shape)
    }

    fn gather_rc(self, index: Rc<Vec<usize>>, shape: &[usize]) -> Result<Var<'t>> {
        let a = self.value();
        let n: usize = shape.iter().product();
        if n != index.len() || index.iter().any(|&i| i >= a.numel()) {
            return Err(shape_err("gather", a.shape(), shape));
        }
        let data = index.iter().map(|&i| a.data()[i]).collect();
        self.tape.push(
            "gather",
            Op::Gather { a: self.id, index },
            Tensor::from_parts(shape.to_vec(), data),
        )
    }

    /// Flat scatter-add into zeros of `shape`: `out.flat[index[m]] += self.flat[m]`.
    pub fn scatter_add(self, index: Vec<usize>, shape: &[usize]) -> Result<Var<'t>> {
        self.scatter_add_rc(Rc::new(index), shape)
    }

    fn scatter_add_rc(self, index: Rc<Vec<usize>>, shape: &[usize]) -> Result<Var<'t>> {
        let a = self.value();
        let n: usize = shape.iter().product();
        if a.numel() != index.len() || index.iter().any(|&i| i >= n) {
            return Err(shape_err("scatter-add", a.shape(), shape));
        }
        let mut data = vec![0.0; n];
        for (&i, &x) in index.iter().zip(a.data()) {
            data[i] += x;
        }
        self.tape.push(
            "scatter-add",
            Op::ScatterAdd { a: self.id, index },
            Tensor::from_parts(shape.to_vec(), data),
        )
    }

    /// Rows `rows[i]` of an `[n, k]` matrix, stacked into `[rows.len(), k]`.
    pub fn gather_rows(self, rows: &[usize]) -> Result<Var<'t>> {
        let shape = self.shape();
        if shape.len() != 2 {
            return Err(shape_err("gather-rows", &shape, &[]));
        }
        let k = shape[1];
        let index = rows
            .iter()
            .flat_map(|&r| (r * k)..(r * k + k))
            .collect::<Vec<_>>();
        self.gather(index, &[rows.len(), k])
    }

    /// Adds row `i` of this `[m, k]` matrix into row `rows[i]` of `[n, k]` zeros.
    pub fn scatter_rows(self, rows: &[usize], n: usize) -> Result<Var<'t>> {
        let shape = self.shape();
        if shape.len() != 2 || shape[0] != rows.len() {
            return Err(shape_err("scatter-rows", &shape, &[rows.len()]));
        }
        let k = shape[1];
        let index = rows
            .iter()
            .flat_map(|&r| (r * k)..(r * k + k))
            .collect::<Vec<_>>();
        self.scatter_add(index, &[n, k])
    }

    /// Elementwise product with a fixed tensor of the same shape.
    pub fn mul_const(self, c: Tensor) -> Result<Var<'t>> {
        let c = self.tape.constant(c);
        self.mul(c)
    }

    pub fn add_const(self, c: Tensor) -> Result<Var<'t>> {
        let c = self.tape.constant(c);
        self.add(c)
    }

    /// `|x|`, differentiated as `sign(x)` (zero at the origin).
    pub fn abs(self) -> Result<Var<'t>> {
        let sign = self.value().map(|x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        });
        self.mul_const(sign)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let tape = Tape::new();
        let a = tape.var(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let i = tape.var(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        assert_eq!(a.matmul(i).unwrap().value().data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn add_vectors() {
        let tape = Tape::new();
        let a = tape.var(Tensor::vector(vec![1.0, 2.0]));
        let b = tape.var(Tensor::vector(vec![3.0, 4.0]));
        assert_eq!(a.add(b).unwrap().value().data(), &[4.0, 6.0]);
    }

    #[test]
    fn elu_of_minus_one() {
        let tape = Tape::new();
        let x = tape.scalar(-1.0);
        let y = x.activation(Activation::Elu).unwrap().item();
        assert!((y - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
        assert!((y + 0.63212).abs() < 1e-5);
    }

    #[test]
    fn shape_errors_name_the_op() {
        let tape = Tape::new();
        let a = tape.var(Tensor::zeros(&[2, 3]));
        let b = tape.var(Tensor::zeros(&[2, 3]));
        let err = a.matmul(b).unwrap_err().to_string();
        assert!(err.contains("matmul") && err.contains("[2, 3]"), "{err}");
        let c = tape.var(Tensor::zeros(&[3]));
        let err = a.add(c).unwrap_err().to_string();
        assert!(err.contains("add"), "{err}");
    }

    #[test]
    fn non_finite_is_reported_at_the_producing_op() {
        let tape = Tape::new();
        let x = tape.var(Tensor::vector(vec![0.0, 1.0]));
        let err = x.ln().unwrap_err();
        assert!(matches!(err, Error::NonFinite { op: "logarithm" }));
        let err = x.recip().unwrap_err();
        assert!(matches!(err, Error::NonFinite { op: "reciprocal" }));
    }

    #[test]
    fn first_and_second_derivatives() {
        let tape = Tape::new();
        let x = tape.scalar(3.0);
        let y = x.mul(x).unwrap();
        let g = tape.gradient(y, &[x]).unwrap();
        assert_eq!(g[0].item(), 6.0);

        let x = tape.scalar(2.0);
        let cube = x.mul(x).unwrap().mul(x).unwrap();
        let d1 = tape.gradient(cube, &[x]).unwrap()[0];
        assert_eq!(d1.item(), 12.0);
        let d2 = tape.gradient(d1, &[x]).unwrap()[0];
        assert_eq!(d2.item(), 12.0);
    }

    #[test]
    fn unreachable_wrt_gets_zeros() {
        let tape = Tape::new();
        let x = tape.var(Tensor::vector(vec![1.0, 2.0]));
        let unused = tape.var(Tensor::zeros(&[2, 2]));
        let y = x.square().unwrap().sum().unwrap();
        let later = tape.var(Tensor::zeros(&[3]));
        let g = tape.gradient(y, &[unused, x, later]).unwrap();
        assert_eq!(g[0].value().data(), &[0.0; 4]);
        assert_eq!(g[1].value().data(), &[2.0, 4.0]);
        assert_eq!(g[2].value().shape(), &[3]);
    }

    #[test]
    fn gradient_requires_scalar_output() {
        let tape = Tape::new();
        let x = tape.var(Tensor::vector(vec![1.0, 2.0]));
        assert!(tape.gradient(x, &[x]).is_err());
    }

    #[test]
    fn symmetrize_examples() {
        let tape = Tape::new();
        let m = tape.var(t(&[2, 2], &[0.0, 2.0, 0.0, 0.0]));
        assert_eq!(m.symmetrize().unwrap().value().data(), &[0.0, 1.0, 1.0, 0.0]);
        let s = t(&[2, 2], &[1.0, 5.0, 5.0, -2.0]);
        let m = tape.var(s.clone());
        assert_eq!(*m.symmetrize().unwrap().value(), s);
        let r = tape.var(Tensor::zeros(&[2, 3]));
        assert!(r.symmetrize().is_err());
    }

    #[test]
    fn gather_scatter_rows() {
        let tape = Tape::new();
        let m = tape.var(t(&[3, 2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let g = m.gather_rows(&[2, 0, 2]).unwrap();
        assert_eq!(g.value().data(), &[5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
        let s = g.scatter_rows(&[2, 0, 2], 3).unwrap();
        assert_eq!(s.value().data(), &[1.0, 2.0, 0.0, 0.0, 10.0, 12.0]);
    }

    #[test]
    fn concat_and_slice_are_inverse() {
        let tape = Tape::new();
        let a = tape.var(t(&[2, 1], &[1.0, 2.0]));
        let b = tape.var(t(&[2, 2], &[3.0, 4.0, 5.0, 6.0]));
        let c = Var::concat(&[a, b], 1).unwrap();
        assert_eq!(c.value().data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        assert_eq!(*c.slice(1, 1, 2).unwrap().value(), *b.value());
        let r = Var::concat(&[b, b], 0).unwrap();
        assert_eq!(r.shape(), vec![4, 2]);
        assert_eq!(*r.slice(0, 2, 2).unwrap().pad(0, 2, 4).unwrap().slice(0, 2, 2).unwrap().value(), *b.value());
    }

    #[test]
    fn logsumexp_is_stable() {
        let tape = Tape::new();
        let x = tape.var(Tensor::vector(vec![1000.0, 1000.0]));
        let y = x.logsumexp().unwrap().item();
        assert!((y - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
