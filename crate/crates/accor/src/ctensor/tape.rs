//! The differentiation record.
//!
//! A [`Tape`] is an append-only sequence of nodes; every node stores its
//! forward value and, for non-leaves, a boxed backward rule holding the
//! operand indices. Node indices are assigned in creation order, so the
//! sequence is always topologically sorted and [`Tape::backward`] is a
//! single reverse sweep. A tape is confined to one thread of execution
//! while recording and while running backward.

use super::{CTensor, Cplx};
use crate::error::{Error, Result};

pub type NodeId = usize;

/// Gradient of the loss with respect to one node, as split-real planes
/// `(∂L/∂re, ∂L/∂im)` with the node's own shape.
#[derive(Debug, Clone)]
pub struct GradPlanes {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// Backward rule for one recorded operation.
pub trait TapeOp {
    /// Accumulate gradients into this operation's parents.
    ///
    /// `out_grad` is the loss gradient at this node and `out_value` its
    /// forward value. Implementations must only touch parents for which
    /// `ctx.wants(parent)` is true.
    fn backward(&self, ctx: &mut BackwardCtx<'_>, out_grad: &GradPlanes, out_value: &CTensor);
}

/// View handed to backward rules: read-only node values plus mutable
/// gradient slots.
pub struct BackwardCtx<'a> {
    pub(crate) values: &'a [CTensor],
    pub(crate) requires_grad: &'a [bool],
    pub(crate) grads: &'a mut Grads,
}

impl<'a> BackwardCtx<'a> {
    pub fn value(&self, id: NodeId) -> &CTensor {
        &self.values[id]
    }

    /// Whether gradient flow into `id` is needed at all.
    pub fn wants(&self, id: NodeId) -> bool {
        self.requires_grad[id]
    }

    /// Mutable gradient planes for `id`, allocated as zeros on first touch.
    pub fn grad_mut(&mut self, id: NodeId) -> (&mut [f64], &mut [f64]) {
        let len = self.values[id].len();
        self.grads.planes_mut(id, len)
    }
}

/// All gradients produced by one [`Tape::backward`] sweep.
///
/// Gradients of intermediate (non-leaf) nodes are consumed during the sweep;
/// leaves — parameters and inputs marked as tracked — retain theirs.
pub struct Grads {
    slots: Vec<Option<GradPlanes>>,
}

impl Grads {
    pub fn get(&self, id: NodeId) -> Option<&GradPlanes> {
        self.slots.get(id).and_then(|s| s.as_ref())
    }

    pub(crate) fn planes_mut(&mut self, id: NodeId, len: usize) -> (&mut [f64], &mut [f64]) {
        let slot = &mut self.slots[id];
        if slot.is_none() {
            *slot = Some(GradPlanes {
                re: vec![0.0; len],
                im: vec![0.0; len],
            });
        }
        let g = slot.as_mut().unwrap();
        (&mut g.re, &mut g.im)
    }
}

struct Node {
    op: Option<Box<dyn TapeOp>>,
}

/// Append-only record of operations for reverse-mode differentiation.
#[derive(Default)]
pub struct Tape {
    values: Vec<CTensor>,
    nodes: Vec<Node>,
    requires_grad: Vec<bool>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Untracked leaf (inputs, constants); no gradient is kept for it.
    pub fn leaf(&mut self, value: CTensor) -> NodeId {
        self.push_leaf(value, false)
    }

    /// Tracked leaf (parameters); backward produces its gradient planes.
    pub fn param(&mut self, value: CTensor) -> NodeId {
        self.push_leaf(value, true)
    }

    pub fn constant_scalar(&mut self, c: Cplx) -> NodeId {
        self.leaf(CTensor::scalar(c))
    }

    fn push_leaf(&mut self, value: CTensor, requires_grad: bool) -> NodeId {
        let id = self.values.len();
        self.values.push(value);
        self.nodes.push(Node { op: None });
        self.requires_grad.push(requires_grad);
        id
    }

    /// Record a computed node. `parents` drive gradient tracking.
    pub fn push_op(
        &mut self,
        value: CTensor,
        op: Box<dyn TapeOp>,
        parents: &[NodeId],
    ) -> NodeId {
        let rg = parents.iter().any(|&p| self.requires_grad[p]);
        let id = self.values.len();
        self.values.push(value);
        self.nodes.push(Node { op: Some(op) });
        self.requires_grad.push(rg);
        id
    }

    pub fn value(&self, id: NodeId) -> &CTensor {
        &self.values[id]
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.requires_grad[id]
    }

    /// Scalar convenience: the real part of a length-1 node.
    pub fn scalar_value(&self, id: NodeId) -> Result<f64> {
        let v = self.value(id);
        if !v.is_scalar() {
            return Err(Error::usage("node is not a scalar"));
        }
        Ok(v.re()[0])
    }

    /// Reverse sweep from a real-valued scalar node.
    ///
    /// Rejects non-scalar nodes and nodes whose imaginary part is not
    /// exactly zero; losses are real-valued by construction.
    pub fn backward(&self, loss: NodeId) -> Result<Grads> {
        let lv = self
            .values
            .get(loss)
            .ok_or_else(|| Error::usage("backward: unknown node id"))?;
        if !lv.is_scalar() {
            return Err(Error::usage(format!(
                "backward requires a scalar node, got shape {:?}",
                lv.shape()
            )));
        }
        if lv.im()[0] != 0.0 {
            return Err(Error::usage(
                "backward requires a real-valued loss (imaginary part must be exactly zero)",
            ));
        }

        let mut grads = Grads {
            slots: (0..=loss).map(|_| None).collect(),
        };
        grads.slots[loss] = Some(GradPlanes {
            re: vec![1.0],
            im: vec![0.0],
        });

        for id in (0..=loss).rev() {
            if grads.slots[id].is_none() {
                continue;
            }
            if let Some(op) = &self.nodes[id].op {
                let g = grads.slots[id].take().unwrap();
                let mut ctx = BackwardCtx {
                    values: &self.values,
                    requires_grad: &self.requires_grad,
                    grads: &mut grads,
                };
                op.backward(&mut ctx, &g, &self.values[id]);
            }
        }
        Ok(grads)
    }
}
