//! Seeded random instances and orthogonal conjugation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

use super::matrix::{Matrix, SymMatrix};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `Q X Q^T`, re-symmetrized. `Q` must be orthogonal within 1e-10.
pub fn conjugate(x: &SymMatrix, q: &Matrix) -> Result<SymMatrix> {
    if q.dim() != x.dim() {
        return Err(Error::Input("conjugate: dimension mismatch".into()));
    }
    let defect = q.orthogonality_defect();
    if defect > 1e-10 {
        return Err(Error::Input(format!("Q is not orthogonal (defect {defect:e})")));
    }
    Ok(q.matmul(x.as_matrix()).matmul(&q.transpose()).symmetric_part())
}

/// Haar-distributed orthogonal matrix (Gram-Schmidt on a Gaussian matrix).
pub fn random_orthogonal<R: Rng>(d: usize, rng: &mut R) -> Matrix {
    loop {
        let g = Matrix::from_fn(d, |_, _| rng.sample(StandardNormal));
        if let Some(q) = orthonormalize_columns(&g) {
            return q;
        }
    }
}

/// Modified Gram-Schmidt, run twice for orthogonality at roundoff level.
fn orthonormalize_columns(g: &Matrix) -> Option<Matrix> {
    let d = g.dim();
    let mut cols: Vec<Vec<f64>> = (0..d).map(|k| g.column(k)).collect();
    for k in 0..d {
        for _ in 0..2 {
            for j in 0..k {
                let proj: f64 = cols[k].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
                let (head, tail) = cols.split_at_mut(k);
                for (v, u) in tail[0].iter_mut().zip(&head[j]) {
                    *v -= proj * u;
                }
            }
        }
        let norm = cols[k].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return None;
        }
        cols[k].iter_mut().for_each(|v| *v /= norm);
    }
    Some(Matrix::from_fn(d, |i, k| cols[k][i]))
}

/// Symmetric matrix with independent standard normal entries on and above the diagonal.
pub fn rand_sym_with<R: Rng>(d: usize, rng: &mut R) -> SymMatrix {
    SymMatrix::from_fn(d, |_, _| rng.sample(StandardNormal))
}

pub fn rand_sym(d: usize, seed: u64) -> SymMatrix {
    rand_sym_with(d, &mut rng_from_seed(seed))
}

/// Symmetric direction of unit Frobenius norm.
pub fn rand_direction_with<R: Rng>(d: usize, rng: &mut R) -> SymMatrix {
    let xi = rand_sym_with(d, rng);
    let norm = xi.frobenius_norm();
    if norm == 0.0 {
        SymMatrix::identity(d).scale(1.0 / (d as f64).sqrt())
    } else {
        xi.scale(1.0 / norm)
    }
}

/// `Q diag(r) Q^T` for a random orthogonal `Q`.
pub fn sym_with_spectrum_with<R: Rng>(r: &[f64], rng: &mut R) -> SymMatrix {
    let q = random_orthogonal(r.len(), rng);
    with_eigenframe(r, &q)
}

pub fn sym_with_spectrum(r: &[f64], seed: u64) -> SymMatrix {
    sym_with_spectrum_with(r, &mut rng_from_seed(seed))
}

/// `Q diag(r) Q^T` for a given orthogonal `Q`.
pub fn with_eigenframe(r: &[f64], q: &Matrix) -> SymMatrix {
    let d = r.len();
    SymMatrix::from_fn(d, |i, j| (0..d).map(|k| q[(i, k)] * r[k] * q[(j, k)]).sum())
}

/// Random eigenvalues, sorted non-increasing, with every consecutive gap at
/// least `min_gap`, shifted so the smallest equals `floor`.
pub fn spectrum_with_gaps<R: Rng>(d: usize, min_gap: f64, floor: f64, rng: &mut R) -> Vec<f64> {
    let mut r = Vec::with_capacity(d);
    let mut level = floor;
    for _ in 0..d {
        r.push(level);
        level += min_gap + rng.random::<f64>();
    }
    r.reverse();
    r
}
