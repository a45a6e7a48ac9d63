//! Numerical evaluation of a [`TermSum`] at a spectrum.

use std::collections::{BTreeMap, HashMap};

use crate::dsl::{DiagFn, MultiIndex, Partials};
use crate::error::Result;
use crate::linalg::WMatrix;
use crate::quadrature::GaussLegendre;

use super::termsum::{Monomial, TermSum};

/// Value of a trace monomial from the `w` matrix.
pub fn monomial_value(mono: &Monomial, w: &WMatrix) -> f64 {
    let mut buf = Vec::new();
    mono.words()
        .iter()
        .map(|word| {
            buf.clear();
            buf.extend(word.letters().iter().map(|&a| a as usize));
            w.trace_word(&buf)
        })
        .product()
}

struct GroupTerm {
    coeff: f64,
    alpha: usize,
    pows: Vec<u8>,
}

/// Terms sharing one chain of midpoint paths; they share quadrature points.
#[derive(Default)]
struct Group {
    alphas: Vec<MultiIndex>,
    terms: Vec<GroupTerm>,
}

impl Group {
    fn alpha_slot(&mut self, alpha: &MultiIndex) -> usize {
        match self.alphas.iter().position(|a| a == alpha) {
            Some(k) => k,
            None => {
                self.alphas.push(alpha.clone());
                self.alphas.len() - 1
            }
        }
    }
}

/// Evaluates term sums at a fixed `(r, w)` for one base function.
pub struct Evaluator<'a> {
    r: &'a [f64],
    w: &'a WMatrix,
    partials: &'a mut Partials,
    quad_nodes: usize,
    rules: HashMap<usize, GaussLegendre>,
    nodes_used: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(r: &'a [f64], w: &'a WMatrix, partials: &'a mut Partials, quad_nodes: usize) -> Self {
        Evaluator {
            r,
            w,
            partials,
            quad_nodes: quad_nodes.max(1),
            rules: HashMap::new(),
            nodes_used: 0,
        }
    }

    /// Largest per-level node count used so far.
    pub fn nodes_used(&self) -> usize {
        self.nodes_used
    }

    pub fn evaluate(&mut self, ts: &TermSum) -> Result<f64> {
        let degree = self.partials.base().poly_degree();
        let mut groups: BTreeMap<Vec<(u8, u8)>, Group> = BTreeMap::new();
        for (factor, mono, c) in ts.terms() {
            if let Some(p) = degree {
                if factor.alpha.order() as u32 > p {
                    continue;
                }
            }
            let mv = monomial_value(mono, self.w);
            if mv == 0.0 {
                continue;
            }
            if self.partials.get(&factor.alpha)?.is_zero() {
                continue;
            }
            let key: Vec<(u8, u8)> = factor.path.iter().map(|s| (s.i, s.j)).collect();
            let group = groups.entry(key).or_default();
            let alpha = group.alpha_slot(&factor.alpha);
            group.terms.push(GroupTerm {
                coeff: c * mv,
                alpha,
                pows: factor.path.iter().map(|s| s.t_pow).collect(),
            });
        }
        let mut total = 0.0;
        for (path, group) in &groups {
            total += self.eval_group(path, group, degree)?;
        }
        Ok(total)
    }

    fn eval_group(&mut self, path: &[(u8, u8)], group: &Group, degree: Option<u32>) -> Result<f64> {
        let fns: Vec<DiagFn> = group
            .alphas
            .iter()
            .map(|a| self.partials.get(a).cloned())
            .collect::<Result<_>>()?;
        let mut stack = Vec::new();
        let m = path.len();
        if m == 0 {
            let vals: Vec<f64> = fns
                .iter()
                .map(|f| f.eval_with(self.r, &mut stack))
                .collect::<Result<_>>()?;
            return Ok(group.terms.iter().map(|t| t.coeff * vals[t.alpha]).sum());
        }

        let nodes = self.node_count(group, degree);
        self.nodes_used = self.nodes_used.max(nodes);
        let rule = self
            .rules
            .entry(nodes)
            .or_insert_with(|| GaussLegendre::new(nodes))
            .clone();
        let max_pow = group
            .terms
            .iter()
            .flat_map(|t| t.pows.iter().copied())
            .max()
            .unwrap_or(0) as usize;
        // tpow[q][p] = (node q)^p
        let tpow: Vec<Vec<f64>> = rule
            .nodes
            .iter()
            .map(|&t| (0..=max_pow).map(|p| t.powi(p as i32)).collect())
            .collect();

        let mut idx = vec![0usize; m];
        let mut y = vec![0.0; self.r.len()];
        let mut vals = vec![0.0; fns.len()];
        let mut total = 0.0;
        loop {
            y.copy_from_slice(self.r);
            // path[0] is outermost, so the last segment acts on r first.
            for s in (0..m).rev() {
                let (i, j) = (path[s].0 as usize, path[s].1 as usize);
                let t = rule.nodes[idx[s]];
                let (a, b) = (0.5 * (1.0 + t), 0.5 * (1.0 - t));
                let (yi, yj) = (y[i], y[j]);
                y[i] = a * yi + b * yj;
                y[j] = b * yi + a * yj;
            }
            for (v, f) in vals.iter_mut().zip(&fns) {
                *v = f.eval_with(&y, &mut stack)?;
            }
            let weight: f64 = idx.iter().map(|&q| rule.weights[q]).product();
            let mut inner = 0.0;
            for t in &group.terms {
                let mut c = t.coeff * vals[t.alpha];
                for (s, &p) in t.pows.iter().enumerate() {
                    c *= tpow[idx[s]][p as usize];
                }
                inner += c;
            }
            total += weight * inner;

            // Odometer over the tensor grid.
            let mut s = 0;
            loop {
                if s == m {
                    return Ok(total);
                }
                idx[s] += 1;
                if idx[s] < nodes {
                    break;
                }
                idx[s] = 0;
                s += 1;
            }
        }
    }

    /// Per-level node count: exact for polynomial `f`, `quad_nodes` otherwise.
    fn node_count(&self, group: &Group, degree: Option<u32>) -> usize {
        let Some(p) = degree else {
            return self.quad_nodes;
        };
        let mut needed = 1;
        for t in &group.terms {
            let deg = p as usize - group.alphas[t.alpha].order();
            for &pw in &t.pows {
                needed = needed.max((deg + pw as usize + 2) / 2);
            }
        }
        needed.min(self.quad_nodes)
    }
}
