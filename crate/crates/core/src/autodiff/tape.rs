//! Append-only gradient tape over vector-valued nodes.
//!
//! Scalars are length-1 vectors. Elementwise primitives record their local
//! partials at forward time; structured operations (convolution, STFT,
//! the gain smoother) record a closure that applies their adjoint.
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order and one reverse sweep yields every gradient.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};

/// Maps the output gradient to one gradient per parent. The flag slice says
/// which parents need a gradient; entries for the others may be empty.
pub type BackwardFn = Box<dyn Fn(&[f64], &[bool]) -> Vec<Vec<f64>>>;

struct Node {
    op: &'static str,
    value: Rc<Vec<f64>>,
    parents: Vec<usize>,
    backward: Option<BackwardFn>,
    needs_grad: bool,
}

/// Scales the local partial of one primitive. Used to prove that the
/// finite-difference check catches a wrong derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fault {
    pub op: &'static str,
    pub factor: f64,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    fault: Option<Fault>,
}

#[derive(Clone, Copy)]
pub struct Var<'t> {
    pub(crate) tape: &'t Tape,
    pub(crate) index: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let nodes = self.tape.nodes.borrow();
        let n = &nodes[self.index];
        write!(f, "Var#{}({}, len {})", self.index, n.op, n.value.len())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fault(fault: Fault) -> Self {
        Self {
            nodes: RefCell::default(),
            fault: Some(fault),
        }
    }

    pub(crate) fn fault_factor(&self, op: &str) -> f64 {
        match self.fault {
            Some(f) if f.op == op => f.factor,
            _ => 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, node: Node) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var {
            tape: self,
            index: nodes.len() - 1,
        }
    }

    /// A differentiable input.
    pub fn leaf(&self, value: Vec<f64>) -> Var<'_> {
        self.push(Node {
            op: "leaf",
            value: Rc::new(value),
            parents: Vec::new(),
            backward: None,
            needs_grad: true,
        })
    }

    pub fn constant(&self, value: Vec<f64>) -> Var<'_> {
        self.push(Node {
            op: "const",
            value: Rc::new(value),
            parents: Vec::new(),
            backward: None,
            needs_grad: false,
        })
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(vec![value])
    }

    /// Records an operation with a hand-written adjoint.
    pub fn custom<'t>(
        &'t self,
        op: &'static str,
        value: Vec<f64>,
        parents: &[Var<'t>],
        backward: BackwardFn,
    ) -> Var<'t> {
        let parents: Vec<usize> = parents
            .iter()
            .map(|p| {
                debug_assert!(std::ptr::eq(p.tape, self), "mixed tapes");
                p.index
            })
            .collect();
        let needs_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|&p| nodes[p].needs_grad)
        };
        self.push(Node {
            op,
            value: Rc::new(value),
            parents,
            backward: needs_grad.then_some(backward),
            needs_grad,
        })
    }

    /// Reverse sweep from a scalar output; returns the gradient of every
    /// requested variable (zeros if the output does not depend on it).
    pub fn gradients(&self, output: Var<'_>, wrt: &[Var<'_>]) -> Result<Vec<Vec<f64>>> {
        let nodes = self.nodes.borrow();
        if nodes[output.index].value.len() != 1 {
            return Err(Error::param(
                "output",
                format!("gradient needs a scalar output, got length {}", nodes[output.index].value.len()),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..=output.index).map(|_| None).collect();
        grads[output.index] = Some(vec![1.0]);
        for i in (0..=output.index).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            let Some(backward) = &node.backward else {
                grads[i] = Some(g);
                continue;
            };
            let needs: Vec<bool> = node.parents.iter().map(|&p| nodes[p].needs_grad).collect();
            let parent_grads = backward(&g, &needs);
            for ((&p, pg), &need) in node.parents.iter().zip(parent_grads).zip(&needs) {
                if !need {
                    continue;
                }
                if let Some(bad) = pg.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "gradient entry {bad} flowing from node #{i} ({}) into node #{p} ({})",
                        node.op, nodes[p].op
                    )));
                }
                match &mut grads[p] {
                    Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(pg),
                }
            }
            grads[i] = Some(g);
        }
        Ok(wrt
            .iter()
            .map(|v| {
                grads
                    .get(v.index)
                    .and_then(|g| g.clone())
                    .unwrap_or_else(|| vec![0.0; nodes[v.index].value.len()])
            })
            .collect())
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Rc<Vec<f64>> {
        Rc::clone(&self.tape.nodes.borrow()[self.index].value)
    }

    pub fn scalar_value(&self) -> f64 {
        self.value()[0]
    }

    pub fn len(&self) -> usize {
        self.tape.nodes.borrow()[self.index].value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn op(&self) -> &'static str {
        self.tape.nodes.borrow()[self.index].op
    }

    /// Gradient of this scalar with respect to `wrt`.
    pub fn backward(&self, wrt: &[Var<'t>]) -> Result<Vec<Vec<f64>>> {
        self.tape.gradients(*self, wrt)
    }
}

/// Value and gradient of `f` at `at`, where `f` receives the parameters as a
/// single leaf vector.
pub fn value_and_grad<F>(at: &[f64], f: F) -> Result<(f64, Vec<f64>)>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    value_and_grad_on(&Tape::new(), at, f)
}

pub fn value_and_grad_on<F>(tape: &Tape, at: &[f64], f: F) -> Result<(f64, Vec<f64>)>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    let leaf = tape.leaf(at.to_vec());
    let out = f(tape, leaf)?;
    let value = out.scalar_value();
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("objective value {value}")));
    }
    let mut g = out.backward(&[leaf])?;
    Ok((value, g.remove(0)))
}
