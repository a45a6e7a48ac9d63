//! Newton power sums, the Vandermonde Jacobian and the polynomial lift
//! `F(X) = p(Tr X, Tr X^2, ..., Tr X^d)`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigh, rand_direction_with, rng_from_seed, Matrix, SymMatrix};
use crate::oracle::central_derivative;

/// Largest weighted degree accepted by [`lift_polynomial`].
pub const DEFAULT_DEGREE_CAP: usize = 24;

/// `p[k-1] = sum_i r_i^k` and the scaled `n[k-1] = p[k-1] / k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerSums {
    pub p: Vec<f64>,
    pub n: Vec<f64>,
}

impl PowerSums {
    fn from_p(p: Vec<f64>) -> Self {
        let n = p.iter().enumerate().map(|(k, v)| v / (k + 1) as f64).collect();
        PowerSums { p, n }
    }
}

/// `Tr X^k` for `k = 1..=kmax` by repeated multiplication.
pub fn power_sums(x: &SymMatrix, kmax: usize) -> Result<PowerSums> {
    if kmax == 0 {
        return Err(Error::Input("kmax must be at least 1".into()));
    }
    let mut p = Vec::with_capacity(kmax);
    let mut acc = x.as_matrix().clone();
    p.push(acc.trace());
    for _ in 1..kmax {
        acc = acc.matmul(x.as_matrix());
        p.push(acc.trace());
    }
    Ok(PowerSums::from_p(p))
}

/// `sum_i r_i^k` for `k = 1..=kmax`.
pub fn power_sums_of(r: &[f64], kmax: usize) -> PowerSums {
    PowerSums::from_p(
        (1..=kmax)
            .map(|k| r.iter().map(|v| v.powi(k as i32)).sum())
            .collect(),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vandermonde {
    /// Row `k` is `(r_1^k, ..., r_d^k)`, `k = 0..d`.
    pub matrix: Matrix,
    /// Determinant by elimination.
    pub det: f64,
    /// `prod_{i<j} (r_j - r_i)`.
    pub det_product: f64,
}

pub fn vandermonde_jacobian(r: &[f64]) -> Vandermonde {
    let d = r.len();
    let matrix = Matrix::from_fn(d, |k, j| r[j].powi(k as i32));
    let det = matrix.determinant();
    let mut det_product = 1.0;
    for i in 0..d {
        for j in (i + 1)..d {
            det_product *= r[j] - r[i];
        }
    }
    Vandermonde {
        matrix,
        det,
        det_product,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Products of `e_1, ..., e_d`.
    Elementary,
    /// Products of `p_1, ..., p_d`.
    PowerSum,
}

/// `coeff * prod_k b_k^{exponents[k-1]}` in the chosen basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymTerm {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymPoly {
    pub basis: Basis,
    pub terms: Vec<SymTerm>,
}

impl SymPoly {
    /// Parses the JSON list form `[{"coeff": c, "exponents": [..]}, ...]`.
    pub fn from_json(src: &str, basis: Basis) -> Result<SymPoly> {
        let terms: Vec<SymTerm> =
            serde_json::from_str(src).map_err(|e| Error::Input(format!("polynomial JSON: {e}")))?;
        let poly = SymPoly { basis, terms };
        poly.validate()?;
        Ok(poly)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.terms).expect("terms serialize")
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.iter().any(|t| !t.coeff.is_finite()) {
            return Err(Error::Input("polynomial coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Number of basis variables referenced.
    pub fn vars(&self) -> usize {
        self.terms.iter().map(|t| t.exponents.len()).max().unwrap_or(0)
    }

    /// Degree in `r`: basis variable `k` has degree `k`.
    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.exponents.iter().enumerate().map(|(k, &e)| (k + 1) * e as usize).sum())
            .max()
            .unwrap_or(0)
    }

    /// Value with basis variable `k` set to `vals[k-1]`.
    pub fn eval(&self, vals: &[f64]) -> Result<f64> {
        if self.vars() > vals.len() {
            return Err(Error::Input(format!(
                "polynomial uses {} basis variables but only {} are available",
                self.vars(),
                vals.len()
            )));
        }
        Ok(self
            .terms
            .iter()
            .map(|t| {
                t.coeff
                    * t.exponents
                        .iter()
                        .zip(vals)
                        .map(|(&e, v)| v.powi(e as i32))
                        .product::<f64>()
            })
            .sum())
    }

    /// The same polynomial written in power sums.
    pub fn to_power_sums(&self) -> Result<SymPoly> {
        if self.basis == Basis::PowerSum {
            return Ok(self.clone());
        }
        let d = self.vars();
        let table: Vec<Poly> = (1..=d).map(|k| esym_poly(k, d)).collect();
        let mut out = Poly::new();
        for t in &self.terms {
            let mut acc = constant(t.coeff, d);
            for (k, &e) in t.exponents.iter().enumerate() {
                for _ in 0..e {
                    acc = mul(&acc, &table[k]);
                }
            }
            add_into(&mut out, &acc);
        }
        Ok(from_poly(out, Basis::PowerSum))
    }

    /// The matching expression over eigenvalues, e.g. `2*esym(1)^2*esym(3)`.
    pub fn to_expr_source(&self) -> String {
        let name = match self.basis {
            Basis::Elementary => "esym",
            Basis::PowerSum => "psum",
        };
        if self.terms.is_empty() {
            return "0".into();
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| {
                let mut factors = vec![format!("({})", t.coeff)];
                for (k, &e) in t.exponents.iter().enumerate() {
                    match e {
                        0 => {}
                        1 => factors.push(format!("{name}({})", k + 1)),
                        _ => factors.push(format!("{name}({})^{e}", k + 1)),
                    }
                }
                factors.join("*")
            })
            .collect();
        parts.join(" + ")
    }
}

impl fmt::Display for SymPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_expr_source())
    }
}

type Poly = BTreeMap<Vec<u32>, f64>;

fn constant(c: f64, vars: usize) -> Poly {
    let mut p = Poly::new();
    p.insert(vec![0; vars], c);
    p
}

fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            *out.entry(e).or_default() += ca * cb;
        }
    }
    out.retain(|_, c| *c != 0.0);
    out
}

fn add_into(acc: &mut Poly, other: &Poly) {
    for (e, c) in other {
        *acc.entry(e.clone()).or_default() += c;
    }
    acc.retain(|_, c| *c != 0.0);
}

fn from_poly(p: Poly, basis: Basis) -> SymPoly {
    SymPoly {
        basis,
        terms: p
            .into_iter()
            .map(|(exponents, coeff)| SymTerm { coeff, exponents })
            .collect(),
    }
}

/// `e_k` over `p_1..p_d` via `e_k = (1/k) sum_{m=1}^k (-1)^{m-1} e_{k-m} p_m`.
fn esym_poly(k: usize, d: usize) -> Poly {
    let mut e: Vec<Poly> = vec![constant(1.0, d)];
    for j in 1..=k {
        let mut acc = Poly::new();
        for m in 1..=j {
            let mut pm = vec![0; d];
            pm[m - 1] = 1;
            let mut pm_poly = Poly::new();
            pm_poly.insert(pm, 1.0);
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            let term = mul(&e[j - m], &pm_poly);
            for (exp, c) in term {
                *acc.entry(exp).or_default() += sign * c / j as f64;
            }
        }
        acc.retain(|_, c| *c != 0.0);
        e.push(acc);
    }
    e.swap_remove(k)
}

/// `e_k` written in power sums, `1 <= k <= d`.
pub fn esym_to_psums(k: usize, d: usize) -> Result<SymPoly> {
    if k == 0 || k > d {
        return Err(Error::Input(format!("esym index {k} outside 1..={d}")));
    }
    Ok(from_poly(esym_poly(k, d), Basis::PowerSum))
}

/// `p(Tr X, ..., Tr X^d)` after rewriting `p` in power sums.
pub fn lift_polynomial(poly: &SymPoly, x: &SymMatrix, degree_cap: usize) -> Result<f64> {
    poly.validate()?;
    let degree = poly.degree();
    if degree > degree_cap {
        return Err(Error::DegreeCap {
            degree,
            cap: degree_cap,
        });
    }
    let psum = poly.to_power_sums()?;
    let kmax = psum.vars().max(1);
    psum.eval(&power_sums(x, kmax)?.p)
}

/// Outcome of checking `d r_i / dX = pi_i` against finite differences.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowsCheck {
    pub residual: f64,
    pub directions: usize,
    /// Set when the spectrum is too tight for the check to be meaningful.
    pub skipped: Option<String>,
}

/// Checks the rows of `Dr(X)` along the given directions.
pub fn dr_dx_rows_check_along(x: &SymMatrix, directions: &[SymMatrix]) -> Result<RowsCheck> {
    let s = jacobi_eigh(x)?;
    let d = x.dim();
    if s.gaps().iter().any(|&g| g <= 1e-6) {
        return Ok(RowsCheck {
            residual: 0.0,
            directions: 0,
            skipped: Some("eigenvalues closer than 1e-6; rows of Dr undefined".into()),
        });
    }
    let h = 1e-3 * (1.0 + x.frobenius_norm());
    let mut residual: f64 = 0.0;
    for xi in directions {
        if xi.dim() != d {
            return Err(Error::Input("direction dimension mismatch".into()));
        }
        let scale = xi.frobenius_norm().max(f64::MIN_POSITIVE);
        for i in 0..d {
            let slope = central_derivative(
                |t| Ok(jacobi_eigh(&x.axpy(t, xi))?.r[i]),
                1,
                h / scale,
                2,
            )?;
            let want = s.flag.projection(i).inner(xi);
            residual = residual.max((slope - want).abs());
        }
    }
    Ok(RowsCheck {
        residual,
        directions: directions.len(),
        skipped: None,
    })
}

/// [`dr_dx_rows_check_along`] with three seeded random unit directions.
pub fn dr_dx_rows_check(x: &SymMatrix, seed: u64) -> Result<RowsCheck> {
    let mut rng = rng_from_seed(seed);
    let dirs: Vec<SymMatrix> = (0..3).map(|_| rand_direction_with(x.dim(), &mut rng)).collect();
    dr_dx_rows_check_along(x, &dirs)
}
