//! Spectral functions `F(X) = f(eig(X))` and their derivatives.
//!
//! The `n`-th directional derivative is computed as `(L_xi D)^n f` evaluated
//! at the spectrum of `X`. All but the last operator application are built
//! symbolically in midpoint-integral form (see [`termsum`]); the last one picks
//! per eigenvalue pair between the plain quotient `delta(h)/(r_i - r_j)` and
//! the midpoint integral, according to [`DividedDiffMode`].

pub mod eval;
pub mod termsum;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::dsl::{check_symmetry, DiagExpr, DiagFn, MultiIndex, Params, Partials};
use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigh, w_matrix, Matrix, Spectrum, SymMatrix};
use crate::quadrature::GaussLegendre;

use eval::Evaluator;
use termsum::{apply_d, apply_l_diagonal, apply_l_pair, operator_power, TermCaps, TermSum};

const SYMMETRY_TRIALS: usize = 32;
const SYMMETRY_SEED: u64 = 0x5eed_f00d;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DividedDiffMode {
    Quotient,
    MidpointIntegral,
    Auto,
}

impl fmt::Display for DividedDiffMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DividedDiffMode::Quotient => "quotient",
            DividedDiffMode::MidpointIntegral => "midpoint_integral",
            DividedDiffMode::Auto => "auto",
        })
    }
}

impl FromStr for DividedDiffMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quotient" => Ok(DividedDiffMode::Quotient),
            "midpoint" | "midpoint_integral" => Ok(DividedDiffMode::MidpointIntegral),
            "auto" => Ok(DividedDiffMode::Auto),
            _ => Err(Error::Input(format!("unknown divided-difference mode `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngineConfig {
    pub coalescence_tol: f64,
    pub quad_nodes: usize,
    pub max_order: usize,
    /// Also compute a finite-difference estimate in [`SpectralFn::dirderiv`].
    pub fd_consistency_check: bool,
    pub mode: DividedDiffMode,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            coalescence_tol: 1e-6,
            quad_nodes: 32,
            max_order: 4,
            fd_consistency_check: false,
            mode: DividedDiffMode::Auto,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.coalescence_tol > 0.0) || !self.coalescence_tol.is_finite() {
            return Err(Error::Input("coalescence_tol must be positive".into()));
        }
        if self.quad_nodes < 2 {
            return Err(Error::Input("quad_nodes must be at least 2".into()));
        }
        Ok(())
    }

    pub fn with_mode(mut self, mode: DividedDiffMode) -> Self {
        self.mode = mode;
        self
    }

    /// Whether `r_i` and `r_j` count as separated under the Auto rule.
    pub fn separated(&self, r: &[f64], i: usize, j: usize) -> bool {
        let scale = 1.0 + r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (r[i] - r[j]).abs() > self.coalescence_tol * scale
    }

    /// The concrete mode `mode` resolves to for the pair `(i, j)`.
    pub fn resolve(&self, mode: DividedDiffMode, r: &[f64], i: usize, j: usize) -> DividedDiffMode {
        match mode {
            DividedDiffMode::Auto if self.separated(r, i, j) => DividedDiffMode::Quotient,
            DividedDiffMode::Auto => DividedDiffMode::MidpointIntegral,
            m => m,
        }
    }
}

/// Per-pair record of which divided-difference form was used.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairMode {
    /// 1-based eigenvalue indices.
    pub i: usize,
    pub j: usize,
    pub gap: f64,
    pub mode: DividedDiffMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirDeriv {
    pub value: f64,
    pub order: usize,
    pub pairs: Vec<PairMode>,
    /// Finite-difference estimate when `fd_consistency_check` is set.
    pub fd_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HessianAction {
    pub value: SymMatrix,
    pub pairs: Vec<PairMode>,
}

/// `F = f o eig` for one symmetric `f` at a fixed dimension.
#[derive(Clone, Debug)]
pub struct SpectralFn {
    expr: DiagExpr,
    base: DiagFn,
    config: EngineConfig,
}

impl SpectralFn {
    /// Instantiates `f` at dimension `d` and rejects it unless it is
    /// permutation-symmetric there.
    pub fn new(expr: &DiagExpr, d: usize, params: &Params, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        if d == 0 {
            return Err(Error::Input("dimension must be at least 1".into()));
        }
        let base = expr.instantiate(d, params)?.with_max_order(config.max_order.max(2) + 1);
        if !check_symmetry(expr, d, SYMMETRY_TRIALS, SYMMETRY_SEED, params)? {
            return Err(Error::NotSymmetric(d));
        }
        Ok(SpectralFn {
            expr: expr.clone(),
            base,
            config,
        })
    }

    pub fn expr(&self) -> &DiagExpr {
        &self.expr
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn diag_fn(&self) -> &DiagFn {
        &self.base
    }

    pub fn spectrum(&self, x: &SymMatrix) -> Result<Spectrum> {
        if x.dim() != self.dim() {
            return Err(Error::Input(format!(
                "matrix is {}x{} but f was instantiated for d = {}",
                x.dim(),
                x.dim(),
                self.dim()
            )));
        }
        jacobi_eigh(x)
    }

    pub fn eval(&self, x: &SymMatrix) -> Result<f64> {
        self.eval_spectrum(&self.spectrum(x)?)
    }

    pub fn eval_spectrum(&self, s: &Spectrum) -> Result<f64> {
        self.base.eval(&s.r)
    }

    /// `sum_i f_{r_i}(r) pi_i`.
    pub fn gradient(&self, x: &SymMatrix) -> Result<SymMatrix> {
        self.gradient_spectrum(&self.spectrum(x)?)
    }

    pub fn gradient_spectrum(&self, s: &Spectrum) -> Result<SymMatrix> {
        let d = self.dim();
        let mut partials = Partials::new(self.base.clone());
        let mut m = Matrix::zeros(d);
        for k in 0..d {
            m[(k, k)] = partials.get(&MultiIndex::unit(d, k))?.eval(&s.r)?;
        }
        Ok(conjugate_by_flag(&m, s))
    }

    /// Divided difference of `g = d^alpha f` between coordinates `i` and `j`
    /// (0-based): `(g_i - g_j)(r) / (r_i - r_j)`, or equivalently
    /// `(1/2) int_0^1 (d_i - d_j)(g_i - g_j)(r(t)) dt` along the midpoint path.
    pub fn divided_difference(
        &self,
        alpha: &MultiIndex,
        r: &[f64],
        i: usize,
        j: usize,
        mode: DividedDiffMode,
    ) -> Result<f64> {
        let mut partials = Partials::new(self.base.clone());
        divided_difference_with(&mut partials, &self.config, alpha, r, i, j, mode)
    }

    /// `H[xi] = D^2 F(X)[xi, .]` as a symmetric matrix.
    pub fn hessian_apply(&self, x: &SymMatrix, xi: &SymMatrix) -> Result<HessianAction> {
        self.hessian_apply_spectrum(&self.spectrum(x)?, xi)
    }

    pub fn hessian_apply_spectrum(&self, s: &Spectrum, xi: &SymMatrix) -> Result<HessianAction> {
        let d = self.dim();
        let w = w_matrix(&s.flag, xi)?;
        let mut partials = Partials::new(self.base.clone());
        let zero = MultiIndex::zero(d);
        let mut m = Matrix::zeros(d);
        for i in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                let alpha = MultiIndex::unit(d, i).bump(k);
                acc += partials.get(&alpha)?.eval(&s.r)? * w.get(k, k);
            }
            m[(i, i)] = acc;
        }
        let mut pairs = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                let mode = self.config.resolve(self.config.mode, &s.r, i, j);
                let dd = divided_difference_with(&mut partials, &self.config, &zero, &s.r, i, j, mode)?;
                m[(i, j)] = dd * w.get(i, j);
                m[(j, i)] = m[(i, j)];
                pairs.push(pair_mode(&s.r, i, j, mode));
            }
        }
        Ok(HessianAction {
            value: conjugate_by_flag(&m, s),
            pairs,
        })
    }

    /// `D^n_xi F(X)`.
    pub fn dirderiv(&self, x: &SymMatrix, xi: &SymMatrix, n: usize) -> Result<DirDeriv> {
        let s = self.spectrum(x)?;
        let mut out = self.dirderiv_spectrum(&s, xi, n)?;
        if self.config.fd_consistency_check && (1..=3).contains(&n) {
            let fd = crate::oracle::fd_dirderiv(
                |y: &SymMatrix| self.eval(y),
                x,
                xi,
                n,
                &crate::oracle::FdConfig::for_order(n),
            )?;
            out.fd_value = Some(fd);
        }
        Ok(out)
    }

    /// `D^n_xi F` at a given spectrum; any valid eigenflag gives the same value.
    pub fn dirderiv_spectrum(&self, s: &Spectrum, xi: &SymMatrix, n: usize) -> Result<DirDeriv> {
        let d = self.dim();
        if s.dim() != d || xi.dim() != d {
            return Err(Error::Input(format!("dimension mismatch: f is set up for d = {d}")));
        }
        if n > self.config.max_order {
            return Err(Error::OrderCap {
                order: n,
                cap: self.config.max_order,
            });
        }
        if n == 0 {
            return Ok(DirDeriv {
                value: self.eval_spectrum(s)?,
                order: 0,
                pairs: Vec::new(),
                fd_value: None,
            });
        }
        let w = w_matrix(&s.flag, xi)?;
        let prev = cached_power(d, n - 1, self.config.max_order)?;
        let grads = apply_d(&prev);
        let mut last = apply_l_diagonal(&grads);
        let mut pairs = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                let mode = self.config.resolve(self.config.mode, &s.r, i, j);
                let part = match mode {
                    DividedDiffMode::Quotient => {
                        let gap = s.r[i] - s.r[j];
                        if gap == 0.0 {
                            return Err(Error::Coalescence(format!(
                                "quotient divided difference at equal eigenvalues r[{}] = r[{}]",
                                i + 1,
                                j + 1
                            )));
                        }
                        scaled(&prev.delta_pair(i, j), 1.0 / gap)
                    }
                    _ => apply_l_pair(&grads, i, j),
                };
                for (factor, mono, c) in part.terms() {
                    last.add(factor.clone(), mono.clone(), c);
                }
                pairs.push(pair_mode(&s.r, i, j, mode));
            }
        }
        let mut partials = Partials::new(self.base.clone());
        let value = Evaluator::new(&s.r, &w, &mut partials, self.config.quad_nodes).evaluate(&last)?;
        if !value.is_finite() {
            return Err(Error::Numerical(format!("non-finite derivative value {value}")));
        }
        Ok(DirDeriv {
            value,
            order: n,
            pairs,
            fd_value: None,
        })
    }
}

fn scaled(ts: &TermSum, s: f64) -> TermSum {
    let mut out = TermSum::zero(ts.dim());
    for (factor, mono, c) in ts.terms() {
        out.add(factor.clone(), mono.clone(), s * c);
    }
    out
}

fn pair_mode(r: &[f64], i: usize, j: usize, mode: DividedDiffMode) -> PairMode {
    PairMode {
        i: i + 1,
        j: j + 1,
        gap: r[i] - r[j],
        mode,
    }
}

/// `U M U^T` with `U` the flag basis.
fn conjugate_by_flag(m: &Matrix, s: &Spectrum) -> SymMatrix {
    let u = s.flag.basis_matrix();
    u.matmul(m).matmul(&u.transpose()).symmetric_part()
}

fn divided_difference_with(
    partials: &mut Partials,
    config: &EngineConfig,
    alpha: &MultiIndex,
    r: &[f64],
    i: usize,
    j: usize,
    mode: DividedDiffMode,
) -> Result<f64> {
    let d = partials.base().dim();
    if r.len() != d || alpha.dim() != d {
        return Err(Error::Input(format!("expected {d} coordinates")));
    }
    if i >= d || j >= d || i == j {
        return Err(Error::Input(format!(
            "pair ({}, {}) is not a pair of distinct indices in 1..={d}",
            i + 1,
            j + 1
        )));
    }
    if alpha.counts()[i] != alpha.counts()[j] {
        return Err(Error::Input(
            "divided difference needs a multi-index symmetric in the pair".into(),
        ));
    }
    match config.resolve(mode, r, i, j) {
        DividedDiffMode::Quotient => {
            let gap = r[i] - r[j];
            if gap == 0.0 {
                return Err(Error::Coalescence(format!(
                    "quotient divided difference at equal values r[{}] = r[{}]",
                    i + 1,
                    j + 1
                )));
            }
            let gi = partials.get(&alpha.bump(i))?.eval(r)?;
            let gj = partials.get(&alpha.bump(j))?.eval(r)?;
            Ok((gi - gj) / gap)
        }
        _ => {
            let gii = partials.get(&alpha.bump(i).bump(i))?.clone();
            let gij = partials.get(&alpha.bump(i).bump(j))?.clone();
            let gjj = partials.get(&alpha.bump(j).bump(j))?.clone();
            let rule = GaussLegendre::new(config.quad_nodes);
            let (mid, half) = (0.5 * (r[i] + r[j]), 0.5 * (r[i] - r[j]));
            let mut y = r.to_vec();
            let mut stack = Vec::new();
            let mut total = 0.0;
            for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
                y[i] = mid + t * half;
                y[j] = mid - t * half;
                let v = gii.eval_with(&y, &mut stack)? - 2.0 * gij.eval_with(&y, &mut stack)?
                    + gjj.eval_with(&y, &mut stack)?;
                total += wt * v;
            }
            Ok(0.5 * total)
        }
    }
}

type PowerCache = Mutex<HashMap<(usize, usize, usize), Arc<TermSum>>>;

/// `(L_xi D)^k f` in midpoint-integral form, shared across calls.
pub fn cached_power(d: usize, k: usize, max_order: usize) -> Result<Arc<TermSum>> {
    static CACHE: OnceLock<PowerCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (d, k, max_order);
    if let Some(ts) = cache.lock().expect("cache poisoned").get(&key) {
        return Ok(ts.clone());
    }
    let ts = Arc::new(operator_power(d, k, TermCaps::for_order(max_order))?);
    cache.lock().expect("cache poisoned").insert(key, ts.clone());
    Ok(ts)
}

/// Eigenvalue and eigenprojection derivatives along `xi`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDerivative {
    pub spectrum: Spectrum,
    pub rdot: Vec<f64>,
    pub pidot: Vec<SymMatrix>,
}

/// `rdot_i = <pi_i, xi>` and `pidot_i = sum_{j != i} (pi_j xi pi_i + pi_i xi pi_j)/(r_i - r_j)`.
pub fn eigen_derivative(x: &SymMatrix, xi: &SymMatrix, config: &EngineConfig) -> Result<EigenDerivative> {
    let d = x.dim();
    if xi.dim() != d {
        return Err(Error::Input("matrix and direction dimensions differ".into()));
    }
    let s = jacobi_eigh(x)?;
    for i in 0..d {
        for j in (i + 1)..d {
            if !config.separated(&s.r, i, j) {
                return Err(Error::Coalescence(
                    "eigenprojection derivative undefined at coalescence".into(),
                ));
            }
        }
    }
    let w = w_matrix(&s.flag, xi)?;
    let rdot = (0..d).map(|i| w.get(i, i)).collect();
    let pidot = (0..d)
        .map(|i| {
            let ui = s.flag.vector(i);
            SymMatrix::from_fn(d, |p, q| {
                (0..d)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let uj = s.flag.vector(j);
                        w.get(i, j) * (uj[p] * ui[q] + ui[p] * uj[q]) / (s.r[i] - s.r[j])
                    })
                    .sum()
            })
        })
        .collect();
    Ok(EigenDerivative {
        spectrum: s,
        rdot,
        pidot,
    })
}

fn spectral(f: &DiagExpr, d: usize, params: &Params) -> Result<SpectralFn> {
    SpectralFn::new(f, d, params, EngineConfig::default())
}

/// `f(eig(X))` with the default configuration.
pub fn eval_f(f: &DiagExpr, x: &SymMatrix, params: &Params) -> Result<f64> {
    spectral(f, x.dim(), params)?.eval(x)
}

pub fn gradient(f: &DiagExpr, x: &SymMatrix, params: &Params) -> Result<SymMatrix> {
    spectral(f, x.dim(), params)?.gradient(x)
}

pub fn hessian_apply(f: &DiagExpr, x: &SymMatrix, xi: &SymMatrix, params: &Params) -> Result<SymMatrix> {
    Ok(spectral(f, x.dim(), params)?.hessian_apply(x, xi)?.value)
}

pub fn dirderiv(f: &DiagExpr, x: &SymMatrix, xi: &SymMatrix, n: usize, params: &Params) -> Result<f64> {
    Ok(spectral(f, x.dim(), params)?.dirderiv(x, xi, n)?.value)
}

pub fn divided_difference(
    f: &DiagExpr,
    alpha: &MultiIndex,
    r: &[f64],
    i: usize,
    j: usize,
    mode: DividedDiffMode,
    params: &Params,
) -> Result<f64> {
    spectral(f, r.len(), params)?.divided_difference(alpha, r, i, j, mode)
}
