//! Flat postfix program compiled from a [`Node`] tree, evaluated with a value stack.

use crate::error::{Error, Result};

use super::ast::Func;
use super::node::{Node, NodeRef};

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Var(usize),
    Neg,
    Add,
    Sub,
    Mul,
    /// Carries the node for domain-error messages.
    Div(NodeRef),
    Powi(i32, NodeRef),
    Func(Func, NodeRef),
}

#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    depth: usize,
}

impl Tape {
    pub fn compile(node: &NodeRef) -> Tape {
        let mut ops = Vec::new();
        emit(node, &mut ops);
        let mut depth: usize = 0;
        let mut max_depth = 0;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Var(_) => depth += 1,
                Op::Add | Op::Sub | Op::Mul | Op::Div(_) => depth -= 1,
                Op::Neg | Op::Powi(..) | Op::Func(..) => {}
            }
            max_depth = max_depth.max(depth);
        }
        Tape {
            ops,
            depth: max_depth,
        }
    }

    pub fn eval(&self, r: &[f64]) -> Result<f64> {
        let mut stack = Vec::with_capacity(self.depth);
        self.eval_with(r, &mut stack)
    }

    /// Evaluates reusing `stack` as scratch space.
    pub fn eval_with(&self, r: &[f64], stack: &mut Vec<f64>) -> Result<f64> {
        stack.clear();
        for op in &self.ops {
            match op {
                Op::Const(v) => stack.push(*v),
                Op::Var(k) => stack.push(r[*k]),
                Op::Neg => {
                    let a = stack.pop().expect("tape underflow");
                    stack.push(-a);
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div(_) => {
                    let b = stack.pop().expect("tape underflow");
                    let a = stack.pop().expect("tape underflow");
                    let v = match op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Div(node) => {
                            if b == 0.0 {
                                return Err(domain(node, "division by zero"));
                            }
                            a / b
                        }
                        _ => unreachable!(),
                    };
                    stack.push(v);
                }
                Op::Powi(k, node) => {
                    let a = stack.pop().expect("tape underflow");
                    if *k < 0 && a == 0.0 {
                        return Err(domain(node, "negative power of zero"));
                    }
                    stack.push(a.powi(*k));
                }
                Op::Func(f, node) => {
                    let a = stack.pop().expect("tape underflow");
                    match f {
                        Func::Log if a <= 0.0 => {
                            return Err(domain(node, &format!("log of non-positive value {a}")))
                        }
                        Func::Sqrt if a < 0.0 => {
                            return Err(domain(node, &format!("sqrt of negative value {a}")))
                        }
                        _ => {}
                    }
                    stack.push(f.apply(a));
                }
            }
        }
        let v = stack.pop().expect("empty tape");
        if !v.is_finite() {
            return Err(Error::Domain {
                node: "<result>".into(),
                detail: format!("non-finite value {v}"),
            });
        }
        Ok(v)
    }
}

fn domain(node: &NodeRef, detail: &str) -> Error {
    Error::Domain {
        node: node.to_string(),
        detail: detail.to_string(),
    }
}

fn emit(node: &NodeRef, ops: &mut Vec<Op>) {
    match &**node {
        Node::Const(v) => ops.push(Op::Const(*v)),
        Node::Var(k) => ops.push(Op::Var(*k)),
        Node::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(match &**node {
                Node::Add(..) => Op::Add,
                Node::Sub(..) => Op::Sub,
                Node::Mul(..) => Op::Mul,
                _ => Op::Div(node.clone()),
            });
        }
        Node::Powi(a, k) => {
            emit(a, ops);
            ops.push(Op::Powi(*k, node.clone()));
        }
        Node::Func(f, a) => {
            emit(a, ops);
            ops.push(Op::Func(*f, node.clone()));
        }
    }
}
