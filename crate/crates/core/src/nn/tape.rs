//! Reverse-mode differentiation over a recorded sequence of feature-map ops.
//!
//! Every op appends a node holding its forward value; [`Tape::backward`]
//! walks the nodes in reverse and accumulates kernel gradients. Scalar heads
//! (losses) are recorded together with their gradient with respect to their
//! input, so the tape does not need to know about individual loss functions.

use super::activation::{gated_unit, gated_unit_backward, relu, relu_backward};
use super::conv::{conv1d, conv1d_backward, ConvParams};
use super::tensor::{FeatureMap, Real};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op<T> {
    Input,
    /// Value recorded without a derivative. Gradients must never reach it.
    Opaque(&'static str),
    Conv { input: NodeId, kernel: usize },
    Gated { input: NodeId },
    Relu { input: NodeId },
    Crop { input: NodeId, offset: usize },
    Add { lhs: NodeId, rhs: NodeId },
    ScalarHead { input: NodeId, grad: FeatureMap<T> },
}

#[derive(Debug)]
struct Node<T> {
    value: FeatureMap<T>,
    op: Op<T>,
}

/// Computation record. Kernels are referenced by index into the slice passed
/// to [`Tape::conv`] and [`Tape::backward`].
#[derive(Debug, Default)]
pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &FeatureMap<T> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: FeatureMap<T>, op: Op<T>) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: FeatureMap<T>) -> NodeId {
        self.push(value, Op::Input)
    }

    /// Records a value produced outside the differentiable op set.
    pub fn opaque(&mut self, name: &'static str, value: FeatureMap<T>) -> NodeId {
        self.push(value, Op::Opaque(name))
    }

    pub fn conv(&mut self, input: NodeId, kernels: &[ConvParams<T>], kernel: usize) -> Result<NodeId> {
        let params = kernels
            .get(kernel)
            .ok_or_else(|| Error::Internal(format!("kernel index {kernel} out of range")))?;
        let value = conv1d(self.value(input), params)?;
        Ok(self.push(value, Op::Conv { input, kernel }))
    }

    pub fn gated(&mut self, input: NodeId) -> Result<NodeId> {
        let value = gated_unit(self.value(input))?;
        Ok(self.push(value, Op::Gated { input }))
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let value = relu(self.value(input));
        self.push(value, Op::Relu { input })
    }

    pub fn crop(&mut self, input: NodeId, offset: usize, len: usize) -> Result<NodeId> {
        let value = self.value(input).crop(offset, len)?;
        Ok(self.push(value, Op::Crop { input, offset }))
    }

    pub fn center_crop(&mut self, input: NodeId, len: usize) -> Result<NodeId> {
        let steps = self.value(input).time_steps();
        if len > steps || (steps - len) % 2 != 0 {
            return Err(Error::shape(format!("cannot center-crop {steps} time steps to {len}")));
        }
        self.crop(input, (steps - len) / 2, len)
    }

    pub fn add(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let mut value = self.value(lhs).clone();
        value.add_assign(self.value(rhs))?;
        Ok(self.push(value, Op::Add { lhs, rhs }))
    }

    /// Records a scalar `value` computed from `input` together with its
    /// gradient with respect to `input`.
    pub fn scalar_head(&mut self, input: NodeId, value: T, grad: FeatureMap<T>) -> Result<NodeId> {
        if grad.shape() != self.value(input).shape() {
            return Err(Error::Internal(format!(
                "scalar head gradient {:?} does not match its input {:?}",
                grad.shape(),
                self.value(input).shape()
            )));
        }
        let scalar = FeatureMap::new(1, 1, vec![value])?;
        Ok(self.push(scalar, Op::ScalarHead { input, grad }))
    }

    /// Exact gradients of the scalar at `root` with respect to every kernel in
    /// `kernels`. Kernels the scalar does not depend on get all-zero gradients.
    pub fn backward(&self, root: NodeId, kernels: &[ConvParams<T>]) -> Result<Vec<ConvParams<T>>> {
        if self.value(root).shape() != (1, 1) {
            return Err(Error::Internal("backward needs a scalar root".into()));
        }
        let mut kernel_grads: Vec<ConvParams<T>> = kernels.iter().map(ConvParams::zeros_like).collect();
        let mut grads: Vec<Option<FeatureMap<T>>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(FeatureMap::new(1, 1, vec![T::one()])?);

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Opaque(name) => {
                    return Err(Error::Internal(format!(
                        "gradient reached non-differentiable op `{name}`"
                    )))
                }
                Op::Conv { input, kernel } => {
                    let params = kernels
                        .get(*kernel)
                        .ok_or_else(|| Error::Internal(format!("kernel index {kernel} out of range")))?;
                    let want_input = self.needs_grad(*input);
                    let gi = conv1d_backward(self.value(*input), params, &g, &mut kernel_grads[*kernel], want_input)?;
                    if let Some(gi) = gi {
                        accumulate(&mut grads, *input, gi)?;
                    }
                }
                Op::Gated { input } => {
                    let gi = gated_unit_backward(self.value(*input), &g)?;
                    accumulate(&mut grads, *input, gi)?;
                }
                Op::Relu { input } => {
                    let gi = relu_backward(self.value(*input), &g);
                    accumulate(&mut grads, *input, gi)?;
                }
                Op::Crop { input, offset } => {
                    let src = self.value(*input);
                    let mut gi = FeatureMap::zeros(src.channels(), src.time_steps());
                    for c in 0..src.channels() {
                        gi.channel_mut(c)[*offset..*offset + g.time_steps()].copy_from_slice(g.channel(c));
                    }
                    accumulate(&mut grads, *input, gi)?;
                }
                Op::Add { lhs, rhs } => {
                    accumulate(&mut grads, *rhs, g.clone())?;
                    accumulate(&mut grads, *lhs, g)?;
                }
                Op::ScalarHead { input, grad } => {
                    let scale = g.as_slice()[0];
                    accumulate(&mut grads, *input, grad.map(|v| v * scale))?;
                }
            }
        }
        Ok(kernel_grads)
    }

    /// Whether any trainable kernel sits upstream of `id`.
    fn needs_grad(&self, id: NodeId) -> bool {
        match &self.nodes[id.0].op {
            Op::Input | Op::Opaque(_) => false,
            _ => true,
        }
    }
}

fn accumulate<T: Real>(grads: &mut [Option<FeatureMap<T>>], id: NodeId, g: FeatureMap<T>) -> Result<()> {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}
