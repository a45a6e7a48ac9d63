//! The symmetric function `f(r_1, ..., r_d)` on the diagonal: parsing,
//! instantiation at a dimension, exact partial derivatives and evaluation.

mod ast;
mod node;
mod parser;
mod tape;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::rng_from_seed;

pub use ast::{BinOp, Expr, Func, Index};
pub use node::{Node, NodeRef};
pub use parser::{ParseError, ParseErrorKind};
pub use tape::Tape;

/// Named constants referenced by bare identifiers in an expression.
pub type Params = BTreeMap<String, f64>;

pub const DEFAULT_MAX_ORDER: usize = 4;

/// Multi-index `alpha` over the `d` variables, selecting `d^alpha f`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u8>);

impl MultiIndex {
    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    pub fn unit(d: usize, k: usize) -> Self {
        let mut m = MultiIndex::zero(d);
        m.0[k] = 1;
        m
    }

    pub fn from_counts(counts: Vec<u8>) -> Self {
        MultiIndex(counts)
    }

    pub fn counts(&self) -> &[u8] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> usize {
        self.0.iter().map(|&c| c as usize).sum()
    }

    /// `alpha + e_k`.
    pub fn bump(&self, k: usize) -> Self {
        let mut m = self.clone();
        m.0[k] += 1;
        m
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// A parsed expression for `f`, not yet tied to a dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagExpr {
    source: String,
    ast: Expr,
}

pub fn parse(src: &str) -> std::result::Result<DiagExpr, ParseError> {
    Ok(DiagExpr {
        source: src.to_string(),
        ast: parser::parse_expr(src)?,
    })
}

impl DiagExpr {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    /// Parameter names referenced by the expression.
    pub fn params(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.ast.params(&mut out);
        out
    }

    /// Structural symmetry: every variable is reached through a full-range
    /// `sum`/`prod` or a symmetric builtin.
    pub fn is_structurally_symmetric(&self) -> bool {
        self.ast.uses_only_bound_indices()
    }

    pub fn instantiate(&self, d: usize, params: &Params) -> Result<DiagFn> {
        if d == 0 {
            return Err(Error::Input("dimension must be at least 1".into()));
        }
        let node = node::instantiate(&self.ast, d, params)?;
        Ok(DiagFn::new(d, node))
    }

    /// Instantiates at `r.len()` and evaluates.
    pub fn eval(&self, r: &[f64], params: &Params) -> Result<f64> {
        self.instantiate(r.len(), params)?.eval(r)
    }
}

/// `f` (or one of its partials) instantiated at dimension `d` with
/// parameters bound, compiled for evaluation.
#[derive(Clone, Debug)]
pub struct DiagFn {
    dim: usize,
    node: NodeRef,
    tape: Arc<Tape>,
    order: usize,
    max_order: usize,
}

impl DiagFn {
    fn new(dim: usize, node: NodeRef) -> Self {
        let tape = Arc::new(Tape::compile(&node));
        DiagFn {
            dim,
            node,
            tape,
            order: 0,
            max_order: DEFAULT_MAX_ORDER,
        }
    }

    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self) -> &NodeRef {
        &self.node
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Total polynomial degree, `None` for non-polynomial `f`.
    pub fn poly_degree(&self) -> Option<u32> {
        self.node.poly_degree()
    }

    pub fn is_zero(&self) -> bool {
        self.node.is_zero()
    }

    pub fn eval(&self, r: &[f64]) -> Result<f64> {
        self.check_len(r)?;
        self.tape.eval(r)
    }

    pub fn eval_with(&self, r: &[f64], stack: &mut Vec<f64>) -> Result<f64> {
        self.tape.eval_with(r, stack)
    }

    fn check_len(&self, r: &[f64]) -> Result<()> {
        if r.len() != self.dim {
            return Err(Error::Input(format!(
                "expected {} values, got {}",
                self.dim,
                r.len()
            )));
        }
        Ok(())
    }

    /// Exact partial `d^alpha` of this function.
    pub fn partial(&self, alpha: &MultiIndex) -> Result<DiagFn> {
        if alpha.dim() != self.dim {
            return Err(Error::Input(format!(
                "multi-index has {} entries for dimension {}",
                alpha.dim(),
                self.dim
            )));
        }
        let order = self.order + alpha.order();
        if order > self.max_order {
            return Err(Error::OrderCap {
                order,
                cap: self.max_order,
            });
        }
        let mut node = self.node.clone();
        for (k, &count) in alpha.counts().iter().enumerate() {
            for _ in 0..count {
                node = node::derivative(&node, k);
            }
        }
        let mut out = DiagFn::new(self.dim, node);
        out.order = order;
        out.max_order = self.max_order;
        Ok(out)
    }
}

/// Memo table of partials of one base function, filled on demand.
#[derive(Debug)]
pub struct Partials {
    base: DiagFn,
    table: HashMap<MultiIndex, DiagFn>,
}

impl Partials {
    pub fn new(base: DiagFn) -> Self {
        let mut table = HashMap::new();
        table.insert(MultiIndex::zero(base.dim()), base.clone());
        Partials { base, table }
    }

    pub fn base(&self) -> &DiagFn {
        &self.base
    }

    pub fn get(&mut self, alpha: &MultiIndex) -> Result<&DiagFn> {
        if !self.table.contains_key(alpha) {
            if alpha.order() > self.base.max_order() {
                return Err(Error::OrderCap {
                    order: alpha.order(),
                    cap: self.base.max_order(),
                });
            }
            // Differentiate the memoized parent in the last non-zero direction.
            let k = alpha
                .counts()
                .iter()
                .rposition(|&c| c > 0)
                .expect("zero multi-index is always present");
            let mut parent_counts = alpha.counts().to_vec();
            parent_counts[k] -= 1;
            let parent = MultiIndex::from_counts(parent_counts);
            let parent_fn = self.get(&parent)?.clone();
            let child = parent_fn.partial(&MultiIndex::unit(alpha.dim(), k))?;
            self.table.insert(alpha.clone(), child);
        }
        Ok(&self.table[alpha])
    }
}

/// Randomized permutation-symmetry test.
///
/// Returns `Ok(true)` immediately for structurally symmetric expressions.
/// Otherwise samples `trials` points in `[0.25, 2]^d` with a random
/// permutation each and compares `f(r o sigma)` with `f(r)` at tolerance
/// `1e-9 (1 + |f(r)|)`. Points where evaluation fails are resampled; if too
/// many fail the result is [`Error::Indeterminate`].
pub fn check_symmetry(
    f: &DiagExpr,
    d: usize,
    trials: usize,
    seed: u64,
    params: &Params,
) -> Result<bool> {
    if d == 0 {
        return Err(Error::Input("dimension must be at least 1".into()));
    }
    if f.is_structurally_symmetric() {
        return Ok(true);
    }
    let fun = f.instantiate(d, params)?;
    let mut rng = rng_from_seed(seed);
    let retry_cap = 10 * trials.max(1);
    let mut failures = 0;
    let mut done = 0;
    while done < trials {
        let r: Vec<f64> = (0..d).map(|_| rng.random_range(0.25..2.0)).collect();
        let mut perm: Vec<usize> = (0..d).collect();
        perm.shuffle(&mut rng);
        let permuted: Vec<f64> = perm.iter().map(|&k| r[k]).collect();
        match (fun.eval(&r), fun.eval(&permuted)) {
            (Ok(a), Ok(b)) => {
                if (a - b).abs() > 1e-9 * (1.0 + a.abs()) {
                    return Ok(false);
                }
                done += 1;
            }
            _ => {
                failures += 1;
                if failures > retry_cap {
                    return Err(Error::Indeterminate(format!(
                        "evaluation failed at {failures} sampled points"
                    )));
                }
            }
        }
    }
    Ok(true)
}
