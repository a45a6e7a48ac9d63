//! Rotation-invariant functions on `R^d`: `F(x) = f(|x|)` with `f` even.
//!
//! Writing `x = r pi` with `|pi| = 1`, the `n`-th directional derivative is
//!
//! ```text
//! D^n_xi F(x) = L^0 L^1 ... L^{n-1} (f^{(n)})(r, pi),
//! L^j(g)(r, pi) = <pi, xi> g(r, pi) + int_0^1 t^j delta_xi(g)(t r, pi) dt,
//! ```
//!
//! where `delta_xi` is the sphere tangent field `delta_xi(pi) = xi - <pi, xi> pi`.
//! Intermediates are polynomials in `s = <pi, xi>` and `q = |xi|^2` times
//! iterated `t`-weighted integrals of `f^{(n)}`; see [`RadialTerm`].

use rand::Rng;

use crate::dsl::{DiagExpr, DiagFn, MultiIndex, Params, DEFAULT_MAX_ORDER};
use crate::error::{Error, Result};
use crate::linalg::rng_from_seed;
use crate::quadrature::GaussLegendre;

const EVEN_TRIALS: usize = 16;
const BOUND_GRID: usize = 257;

/// Even one-variable profile `f(r)` written in terms of `r[1]`.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    expr: DiagExpr,
    f: DiagFn,
    max_order: usize,
    quad_nodes: usize,
}

impl RadialProfile {
    pub fn new(expr: &DiagExpr, params: &Params) -> Result<Self> {
        let f = expr.instantiate(1, params)?.with_max_order(usize::MAX);
        let mut rng = rng_from_seed(0xe7e7);
        for _ in 0..EVEN_TRIALS {
            let r: f64 = rng.random_range(0.1..3.0);
            let (a, b) = match (f.eval(&[r]), f.eval(&[-r])) {
                (Ok(a), Ok(b)) => (a, b),
                _ => return Err(Error::Input("radial profile must be defined and even on R".into())),
            };
            if (a - b).abs() > 1e-10 * (1.0 + a.abs()) {
                return Err(Error::Input(format!(
                    "radial profile is not even: f({r}) = {a}, f(-{r}) = {b}"
                )));
            }
        }
        Ok(RadialProfile {
            expr: expr.clone(),
            f,
            max_order: DEFAULT_MAX_ORDER,
            quad_nodes: 32,
        })
    }

    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order;
        self
    }

    pub fn with_quad_nodes(mut self, nodes: usize) -> Self {
        self.quad_nodes = nodes.max(1);
        self
    }

    pub fn expr(&self) -> &DiagExpr {
        &self.expr
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// `f^{(k)}`.
    pub fn derivative(&self, k: usize) -> Result<DiagFn> {
        self.f.partial(&MultiIndex::from_counts(vec![k as u8]))
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        self.f.eval(&[r])
    }
}

/// `coeff * s^s_pow * q^q_pow * Phi_e(r)` with
/// `Phi_e(r) = int_{[0,1]^m} prod_k t_k^{e_k} f^{(n)}(t_1 ... t_m r) dt`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RadialTerm {
    pub s_pow: u32,
    pub q_pow: u32,
    pub exps: Vec<u32>,
}

/// Symbolic `L^0 ... L^{n-1} (f^{(n)})` as `(coeff, term)` pairs.
pub fn radial_terms(n: usize) -> Vec<(f64, RadialTerm)> {
    let mut terms = vec![(
        1.0,
        RadialTerm {
            s_pow: 0,
            q_pow: 0,
            exps: Vec::new(),
        },
    )];
    for j in (0..n).rev() {
        let mut next: std::collections::BTreeMap<RadialTerm, f64> = Default::default();
        for (c, t) in &terms {
            // <pi, xi> g
            let mut up = t.clone();
            up.s_pow += 1;
            *next.entry(up).or_default() += c;
            // delta(s^a q^b) = a s^{a-1} (q - s^2) q^b, integrated with weight t^j.
            if t.s_pow > 0 {
                let a = t.s_pow as f64;
                let mut exps = t.exps.clone();
                exps.push(j as u32);
                let plus = RadialTerm {
                    s_pow: t.s_pow - 1,
                    q_pow: t.q_pow + 1,
                    exps: exps.clone(),
                };
                let minus = RadialTerm {
                    s_pow: t.s_pow + 1,
                    q_pow: t.q_pow,
                    exps,
                };
                *next.entry(plus).or_default() += a * c;
                *next.entry(minus).or_default() -= a * c;
            }
        }
        terms = next.into_iter().filter(|(_, c)| *c != 0.0).map(|(t, c)| (c, t)).collect();
    }
    terms
}

fn phi(top: &DiagFn, coeffs: Option<&[f64]>, exps: &[u32], r: f64, rule: &GaussLegendre) -> Result<f64> {
    if let Some(c) = coeffs {
        // Exact: int prod t_k^{e_k + p} dt = prod 1/(e_k + p + 1).
        return Ok(c
            .iter()
            .enumerate()
            .map(|(p, cp)| {
                let w: f64 = exps.iter().map(|&e| 1.0 / (e as f64 + p as f64 + 1.0)).product();
                cp * r.powi(p as i32) * w
            })
            .sum());
    }
    let m = exps.len();
    if m == 0 {
        return top.eval(&[r]);
    }
    let mut idx = vec![0usize; m];
    let mut total = 0.0;
    let nodes = rule.len();
    loop {
        let mut scale = 1.0;
        let mut weight = 1.0;
        for (k, &q) in idx.iter().enumerate() {
            let t = rule.nodes[q];
            scale *= t;
            weight *= rule.weights[q] * t.powi(exps[k] as i32);
        }
        total += weight * top.eval(&[scale * r])?;
        let mut k = 0;
        loop {
            if k == m {
                return Ok(total);
            }
            idx[k] += 1;
            if idx[k] < nodes {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Taylor coefficients of `f^{(n)}` at 0 when it is a polynomial.
fn taylor_coeffs(profile: &RadialProfile, n: usize) -> Result<Option<Vec<f64>>> {
    let top = profile.derivative(n)?;
    let Some(deg) = top.poly_degree() else {
        return Ok(None);
    };
    let mut coeffs = Vec::with_capacity(deg as usize + 1);
    let mut factorial = 1.0;
    for p in 0..=deg as usize {
        if p > 0 {
            factorial *= p as f64;
        }
        coeffs.push(profile.derivative(n + p)?.eval(&[0.0])? / factorial);
    }
    Ok(Some(coeffs))
}

/// `D^n_xi F(x)` for `F(x) = f(|x|)`.
pub fn radial_dirderiv(profile: &RadialProfile, x: &[f64], xi: &[f64], n: usize) -> Result<f64> {
    if x.len() != xi.len() || x.is_empty() {
        return Err(Error::Input("point and direction must have the same positive length".into()));
    }
    if n > profile.max_order {
        return Err(Error::OrderCap {
            order: n,
            cap: profile.max_order,
        });
    }
    let r = norm(x);
    let q: f64 = xi.iter().map(|v| v * v).sum();
    // At the origin any unit vector works; consistency makes the value independent of it.
    let pi: Vec<f64> = if r > 0.0 {
        x.iter().map(|v| v / r).collect()
    } else if q > 0.0 {
        xi.iter().map(|v| v / q.sqrt()).collect()
    } else {
        let mut e = vec![0.0; x.len()];
        e[0] = 1.0;
        e
    };
    let s: f64 = pi.iter().zip(xi).map(|(a, b)| a * b).sum();
    let top = profile.derivative(n)?;
    let coeffs = taylor_coeffs(profile, n)?;
    let rule = GaussLegendre::new(profile.quad_nodes);
    let mut total = 0.0;
    for (c, term) in radial_terms(n) {
        let ph = phi(&top, coeffs.as_deref(), &term.exps, r, &rule)?;
        total += c * s.powi(term.s_pow as i32) * q.powi(term.q_pow as i32) * ph;
    }
    Ok(total)
}

/// `delta_xi(pi) = xi - <pi, xi> pi`, tangent to the unit sphere at `pi`.
pub fn delta_sphere(xi: &[f64], pi: &[f64]) -> Result<Vec<f64>> {
    if xi.len() != pi.len() {
        return Err(Error::Input("direction and point must have the same length".into()));
    }
    if (norm(pi) - 1.0).abs() > 1e-12 {
        return Err(Error::Input(format!("|pi| = {} is not 1", norm(pi))));
    }
    let s: f64 = pi.iter().zip(xi).map(|(a, b)| a * b).sum();
    Ok(xi.iter().zip(pi).map(|(x, p)| x - s * p).collect())
}

/// `(|D^n_xi F(x)|, sup_{0 <= r <= |x|} |f^{(n)}(r)|)` over a uniform grid.
pub fn radial_bound_check(profile: &RadialProfile, x: &[f64], xi: &[f64], n: usize) -> Result<(f64, f64)> {
    let lhs = radial_dirderiv(profile, x, xi, n)?.abs();
    let top = profile.derivative(n)?;
    let r = norm(x);
    let mut sup: f64 = 0.0;
    for k in 0..BOUND_GRID {
        let rk = r * k as f64 / (BOUND_GRID - 1) as f64;
        sup = sup.max(top.eval(&[rk])?.abs());
    }
    Ok((lhs, sup))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}
