//! Dense `f64` tensors with tape-based reverse-mode differentiation.
//!
//! Gradients are recorded back onto the tape, so nested derivatives such as
//! `∂_θ ⟨∂_z E_θ(z), v⟩` are obtained by calling [`Tape::gradient`] twice.

mod tape;
mod tensor;
mod trace;

pub use tape::{Activation, Tape, Var};
pub use tensor::Tensor;
pub use trace::{hutchinson_probes, jacobian_trace, TraceMode};

use crate::error::{Error, Result};

/// Tag-dispatched form of the differentiable operations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OpTag {
    Matmul,
    Add,
    Subtract,
    Multiply,
    Scale(f64),
    Sum,
    Mean,
    Concat { axis: usize },
    Activation(Activation),
    Transpose,
    Slice { axis: usize, start: usize, len: usize },
    Square,
    Exponent,
    Logarithm,
    LogSumExp,
    Symmetrize,
}

impl OpTag {
    pub fn arity(&self) -> Option<usize> {
        match self {
            OpTag::Matmul | OpTag::Add | OpTag::Subtract | OpTag::Multiply => Some(2),
            OpTag::Concat { .. } => None,
            _ => Some(1),
        }
    }
}

/// Applies `tag` to `inputs`, recording the result on their tape.
pub fn apply<'t>(tag: OpTag, inputs: &[Var<'t>]) -> Result<Var<'t>> {
    if let Some(n) = tag.arity() {
        if inputs.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{tag:?} takes {n} inputs, got {}",
                inputs.len()
            )));
        }
    }
    match tag {
        OpTag::Matmul => inputs[0].matmul(inputs[1]),
        OpTag::Add => inputs[0].add(inputs[1]),
        OpTag::Subtract => inputs[0].sub(inputs[1]),
        OpTag::Multiply => inputs[0].mul(inputs[1]),
        OpTag::Scale(c) => inputs[0].scale(c),
        OpTag::Sum => inputs[0].sum(),
        OpTag::Mean => inputs[0].mean(),
        OpTag::Concat { axis } => Var::concat(inputs, axis),
        OpTag::Activation(kind) => inputs[0].activation(kind),
        OpTag::Transpose => inputs[0].transpose(),
        OpTag::Slice { axis, start, len } => inputs[0].slice(axis, start, len),
        OpTag::Square => inputs[0].square(),
        OpTag::Exponent => inputs[0].exp(),
        OpTag::Logarithm => inputs[0].ln(),
        OpTag::LogSumExp => inputs[0].logsumexp(),
        OpTag::Symmetrize => inputs[0].symmetrize(),
    }
}
