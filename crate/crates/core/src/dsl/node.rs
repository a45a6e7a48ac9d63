//! Index-free expression trees obtained by instantiating an [`Expr`] at a
//! fixed dimension, with exact symbolic differentiation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::ast::{BinOp, Expr, Func, Index};

pub type NodeRef = Arc<Node>;

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(f64),
    /// 0-based variable index.
    Var(usize),
    Neg(NodeRef),
    Add(NodeRef, NodeRef),
    Sub(NodeRef, NodeRef),
    Mul(NodeRef, NodeRef),
    Div(NodeRef, NodeRef),
    Powi(NodeRef, i32),
    Func(Func, NodeRef),
}

fn konst(v: f64) -> NodeRef {
    Arc::new(Node::Const(v))
}

fn as_const(n: &Node) -> Option<f64> {
    match n {
        Node::Const(v) => Some(*v),
        _ => None,
    }
}

// Folding constructors. They keep derivative trees from filling up with
// `0 * x` and `x + 0` terms, which matters once partials reach order 4.

pub fn add(a: NodeRef, b: NodeRef) -> NodeRef {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => konst(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Arc::new(Node::Add(a, b)),
    }
}

pub fn sub(a: NodeRef, b: NodeRef) -> NodeRef {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => konst(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Arc::new(Node::Sub(a, b)),
    }
}

pub fn mul(a: NodeRef, b: NodeRef) -> NodeRef {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => konst(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => konst(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => Arc::new(Node::Mul(a, b)),
    }
}

pub fn div(a: NodeRef, b: NodeRef) -> NodeRef {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) if y != 0.0 => konst(x / y),
        (Some(x), _) if x == 0.0 => konst(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Arc::new(Node::Div(a, b)),
    }
}

pub fn neg(a: NodeRef) -> NodeRef {
    match &*a {
        Node::Const(v) => konst(-v),
        Node::Neg(inner) => inner.clone(),
        _ => Arc::new(Node::Neg(a)),
    }
}

pub fn powi(a: NodeRef, k: i32) -> NodeRef {
    match (k, as_const(&a)) {
        (0, _) => konst(1.0),
        (1, _) => a,
        (_, Some(x)) if k > 0 || x != 0.0 => konst(x.powi(k)),
        _ => Arc::new(Node::Powi(a, k)),
    }
}

pub fn func(f: Func, a: NodeRef) -> NodeRef {
    match as_const(&a) {
        Some(x) if domain_ok(f, x) => konst(f.apply(x)),
        _ => Arc::new(Node::Func(f, a)),
    }
}

fn domain_ok(f: Func, x: f64) -> bool {
    match f {
        Func::Log => x > 0.0,
        Func::Sqrt => x >= 0.0,
        _ => true,
    }
}

/// Instantiates `expr` at dimension `d`, expanding sums, products and
/// `esym` over `1..=d` and substituting parameter values.
pub fn instantiate(expr: &Expr, d: usize, params: &BTreeMap<String, f64>) -> Result<NodeRef> {
    let mut env = Vec::new();
    build(expr, d, params, &mut env)
}

fn build(
    expr: &Expr,
    d: usize,
    params: &BTreeMap<String, f64>,
    env: &mut Vec<(String, usize)>,
) -> Result<NodeRef> {
    Ok(match expr {
        Expr::Const(v) => konst(*v),
        Expr::Param(name) => match params.get(name) {
            Some(v) => konst(*v),
            None => return Err(Error::UnboundParameter(name.clone())),
        },
        Expr::Var(Index::Literal(k)) => {
            if *k == 0 || *k > d {
                return Err(Error::Input(format!(
                    "r[{k}] is out of range for dimension {d}"
                )));
            }
            Arc::new(Node::Var(k - 1))
        }
        Expr::Var(Index::Bound(name)) => {
            let k = env
                .iter()
                .rev()
                .find(|(n, _)| n == name)
                .map(|(_, k)| *k)
                .ok_or_else(|| Error::Internal(format!("unbound index `{name}`")))?;
            Arc::new(Node::Var(k))
        }
        Expr::Neg(a) => neg(build(a, d, params, env)?),
        Expr::Bin(op, a, b) => {
            let a = build(a, d, params, env)?;
            let b = build(b, d, params, env)?;
            match op {
                BinOp::Add => add(a, b),
                BinOp::Sub => sub(a, b),
                BinOp::Mul => mul(a, b),
                BinOp::Div => div(a, b),
            }
        }
        Expr::Pow(a, k) => powi(build(a, d, params, env)?, *k),
        Expr::Call(f, a) => func(*f, build(a, d, params, env)?),
        Expr::Sum(var, body) | Expr::Prod(var, body) => {
            let is_sum = matches!(expr, Expr::Sum(..));
            let mut acc: Option<NodeRef> = None;
            for k in 0..d {
                env.push((var.clone(), k));
                let term = build(body, d, params, env);
                env.pop();
                let term = term?;
                acc = Some(match acc {
                    None => term,
                    Some(prev) if is_sum => add(prev, term),
                    Some(prev) => mul(prev, term),
                });
            }
            acc.unwrap_or_else(|| konst(if is_sum { 0.0 } else { 1.0 }))
        }
        Expr::ESym(k) => esym(*k as usize, d),
    })
}

/// `e_k(r_1..r_d)` as an explicit sum over k-subsets.
fn esym(k: usize, d: usize) -> NodeRef {
    if k == 0 {
        return konst(1.0);
    }
    if k > d {
        return konst(0.0);
    }
    let mut acc: Option<NodeRef> = None;
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let term = subset
            .iter()
            .map(|&i| Arc::new(Node::Var(i)))
            .reduce(mul)
            .expect("k >= 1");
        acc = Some(match acc {
            None => term,
            Some(prev) => add(prev, term),
        });
        // Next subset in lexicographic order.
        let Some(p) = (0..k).rev().find(|&p| subset[p] < d - k + p) else {
            break;
        };
        subset[p] += 1;
        for q in p + 1..k {
            subset[q] = subset[q - 1] + 1;
        }
    }
    acc.expect("at least one subset")
}

/// Exact partial derivative with respect to variable `k` (0-based).
pub fn derivative(node: &NodeRef, k: usize) -> NodeRef {
    match &**node {
        Node::Const(_) => konst(0.0),
        Node::Var(j) => konst(if *j == k { 1.0 } else { 0.0 }),
        Node::Neg(a) => neg(derivative(a, k)),
        Node::Add(a, b) => add(derivative(a, k), derivative(b, k)),
        Node::Sub(a, b) => sub(derivative(a, k), derivative(b, k)),
        Node::Mul(a, b) => add(
            mul(derivative(a, k), b.clone()),
            mul(a.clone(), derivative(b, k)),
        ),
        Node::Div(a, b) => {
            let da = derivative(a, k);
            let db = derivative(b, k);
            // (a/b)' = a'/b - a b' / b^2
            sub(
                div(da, b.clone()),
                div(mul(a.clone(), db), powi(b.clone(), 2)),
            )
        }
        Node::Powi(a, p) => {
            let da = derivative(a, k);
            mul(mul(konst(*p as f64), powi(a.clone(), p - 1)), da)
        }
        Node::Func(f, a) => {
            let da = derivative(a, k);
            if as_const(&da) == Some(0.0) {
                return konst(0.0);
            }
            let outer = match f {
                Func::Log => div(konst(1.0), a.clone()),
                Func::Exp => node.clone(),
                Func::Sin => func(Func::Cos, a.clone()),
                Func::Cos => neg(func(Func::Sin, a.clone())),
                Func::Sqrt => div(konst(0.5), node.clone()),
            };
            mul(outer, da)
        }
    }
}

impl Node {
    /// Total polynomial degree, or `None` when the node is not a polynomial
    /// in the variables.
    pub fn poly_degree(&self) -> Option<u32> {
        match self {
            Node::Const(_) => Some(0),
            Node::Var(_) => Some(1),
            Node::Neg(a) => a.poly_degree(),
            Node::Add(a, b) | Node::Sub(a, b) => Some(a.poly_degree()?.max(b.poly_degree()?)),
            Node::Mul(a, b) => Some(a.poly_degree()? + b.poly_degree()?),
            Node::Div(a, b) => match b.poly_degree()? {
                0 if !b.has_var() => a.poly_degree(),
                _ => None,
            },
            Node::Powi(a, k) => {
                let da = a.poly_degree()?;
                if da == 0 {
                    Some(0)
                } else if *k >= 0 {
                    Some(da * *k as u32)
                } else {
                    None
                }
            }
            Node::Func(_, a) => {
                if a.has_var() {
                    None
                } else {
                    Some(0)
                }
            }
        }
    }

    pub fn has_var(&self) -> bool {
        match self {
            Node::Const(_) => false,
            Node::Var(_) => true,
            Node::Neg(a) | Node::Powi(a, _) | Node::Func(_, a) => a.has_var(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.has_var() || b.has_var()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Node::Const(v) if *v == 0.0)
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(v) => write!(f, "{v}"),
            Node::Var(k) => write!(f, "r[{}]", k + 1),
            Node::Neg(a) => write!(f, "-({a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "{a}*{b}"),
            Node::Div(a, b) => write!(f, "({a})/({b})"),
            Node::Powi(a, k) => write!(f, "({a})^{k}"),
            Node::Func(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
