//! Central finite differences with Richardson extrapolation.

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdConfig {
    /// Base step relative to `1 + |X|_F` (in units of `|xi|_F`).
    pub step: f64,
    /// Number of halvings combined by Richardson extrapolation.
    pub richardson_levels: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            step: 1e-4,
            richardson_levels: 2,
        }
    }
}

impl FdConfig {
    /// Larger steps for higher orders, where round-off scales like `eps / h^n`.
    pub fn for_order(n: usize) -> Self {
        let step = match n {
            0 | 1 => 1e-4,
            2 => 1e-3,
            _ => 1e-2,
        };
        FdConfig {
            step,
            ..FdConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::Input("finite-difference step must be positive".into()));
        }
        if self.richardson_levels == 0 {
            return Err(Error::Input("richardson_levels must be at least 1".into()));
        }
        Ok(())
    }
}

/// Plain central stencil for the `n`-th derivative of a vector-valued `g` at 0 (`n <= 3`).
fn stencil(g: &mut impl FnMut(f64) -> Result<Vec<f64>>, n: usize, h: f64) -> Result<Vec<f64>> {
    let combine = |pts: &[(f64, f64)], g: &mut dyn FnMut(f64) -> Result<Vec<f64>>, denom: f64| {
        let mut acc: Option<Vec<f64>> = None;
        for &(s, w) in pts {
            let v = g(s)?;
            match acc.as_mut() {
                None => acc = Some(v.iter().map(|a| w * a).collect()),
                Some(a) => {
                    if a.len() != v.len() {
                        return Err(Error::Internal("stencil values changed length".into()));
                    }
                    a.iter_mut().zip(&v).for_each(|(x, y)| *x += w * y);
                }
            }
        }
        Ok(acc.unwrap_or_default().into_iter().map(|a| a / denom).collect())
    };
    match n {
        0 => g(0.0),
        1 => combine(&[(h, 1.0), (-h, -1.0)], g, 2.0 * h),
        2 => combine(&[(h, 1.0), (0.0, -2.0), (-h, 1.0)], g, h * h),
        3 => combine(
            &[(2.0 * h, 1.0), (h, -2.0), (-h, 2.0), (-2.0 * h, -1.0)],
            g,
            2.0 * h * h * h,
        ),
        _ => Err(Error::OrderCap { order: n, cap: 3 }),
    }
}

/// Componentwise `g^{(n)}(0)` by central differences at steps `h, h/2, ...`,
/// combined by Richardson extrapolation.
pub fn central_derivative_vec(
    mut g: impl FnMut(f64) -> Result<Vec<f64>>,
    n: usize,
    h: f64,
    levels: usize,
) -> Result<Vec<f64>> {
    if n == 0 {
        return g(0.0);
    }
    let mut table: Vec<Vec<Vec<f64>>> = Vec::with_capacity(levels + 1);
    for k in 0..=levels {
        let hk = h / f64::powi(2.0, k as i32);
        let mut row = vec![stencil(&mut g, n, hk)?];
        for m in 1..=k {
            let factor = f64::powi(4.0, m as i32);
            let v = row[m - 1]
                .iter()
                .zip(&table[k - 1][m - 1])
                .map(|(fine, coarse)| (factor * fine - coarse) / (factor - 1.0))
                .collect();
            row.push(v);
        }
        table.push(row);
    }
    Ok(table.swap_remove(levels).swap_remove(levels))
}

/// `g^{(n)}(0)` for scalar `g`; see [`central_derivative_vec`].
pub fn central_derivative(
    mut g: impl FnMut(f64) -> Result<f64>,
    n: usize,
    h: f64,
    levels: usize,
) -> Result<f64> {
    Ok(central_derivative_vec(|s| Ok(vec![g(s)?]), n, h, levels)?[0])
}

/// `D^n_xi F(X)` from values of `F` along the line `X + s xi`.
pub fn fd_dirderiv(
    f: impl Fn(&SymMatrix) -> Result<f64>,
    x: &SymMatrix,
    xi: &SymMatrix,
    n: usize,
    cfg: &FdConfig,
) -> Result<f64> {
    cfg.validate()?;
    if x.dim() != xi.dim() {
        return Err(Error::Input("matrix and direction dimensions differ".into()));
    }
    let norm = xi.frobenius_norm();
    if norm == 0.0 {
        return if n == 0 { f(x) } else { Ok(0.0) };
    }
    let h = cfg.step * (1.0 + x.frobenius_norm()) / norm;
    central_derivative(|s| f(&x.axpy(s, xi)), n, h, cfg.richardson_levels)
}

/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}
