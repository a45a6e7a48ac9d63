//! Eigendecomposition `X = sum_i r_i pi_i` with `r` sorted non-increasing and
//! `pi` a flag of rank-one projections, plus the objects built on a flag:
//! the tangent fields `delta(a, xi)` and the rank-one evaluation basis `w`.

use crate::error::{Error, Result};

use super::matrix::{Matrix, SymMatrix};

const MAX_SWEEPS: usize = 30;

/// Tolerance for the flag invariants (idempotence, orthogonality, partition of unity).
pub const FLAG_TOL: f64 = 1e-10;

/// A `d`-tuple of mutually orthogonal rank-one projections summing to the identity.
///
/// The unit vectors spanning each projection are kept alongside, with the
/// sign convention that the largest-magnitude component is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct Flag {
    projections: Vec<SymMatrix>,
    basis: Vec<Vec<f64>>,
}

impl Flag {
    /// Flag from the columns of an orthogonal matrix.
    pub fn from_columns(q: &Matrix) -> Flag {
        let basis: Vec<Vec<f64>> = (0..q.dim()).map(|k| canonical_sign(q.column(k))).collect();
        Flag {
            projections: basis.iter().map(|u| SymMatrix::outer(u)).collect(),
            basis,
        }
    }

    /// The standard flag `(E_11, ..., E_dd)`.
    pub fn standard(d: usize) -> Flag {
        Flag::from_columns(&Matrix::identity(d))
    }

    /// Validates a user-supplied tuple of projections and recovers the unit
    /// vector spanning each one.
    pub fn from_projections(projections: Vec<SymMatrix>) -> Result<Flag> {
        let d = projections.len();
        if d == 0 {
            return Err(Error::Input("flag must contain at least one projection".into()));
        }
        if projections.iter().any(|p| p.dim() != d) {
            return Err(Error::Input(format!("flag of length {d} needs {d}x{d} projections")));
        }
        let mut basis = Vec::with_capacity(d);
        for (k, p) in projections.iter().enumerate() {
            let pivot = (0..d)
                .max_by(|&a, &b| p.get(a, a).total_cmp(&p.get(b, b)))
                .unwrap_or(0);
            let scale = p.get(pivot, pivot);
            if scale <= FLAG_TOL {
                return Err(Error::Input(format!("projection {} is not rank one", k + 1)));
            }
            let u: Vec<f64> = (0..d).map(|i| p.get(i, pivot) / scale.sqrt()).collect();
            let defect = SymMatrix::outer(&u).sub(p).max_abs();
            if defect > FLAG_TOL {
                return Err(Error::Input(format!(
                    "projection {} is not rank one (defect {defect:e})",
                    k + 1
                )));
            }
            basis.push(canonical_sign(u));
        }
        let flag = Flag { projections, basis };
        let defect = flag.invariant_defect();
        if defect > FLAG_TOL {
            return Err(Error::Input(format!("projections do not form a flag (defect {defect:e})")));
        }
        Ok(flag)
    }

    pub fn dim(&self) -> usize {
        self.projections.len()
    }

    pub fn projections(&self) -> &[SymMatrix] {
        &self.projections
    }

    pub fn projection(&self, k: usize) -> &SymMatrix {
        &self.projections[k]
    }

    /// Unit vector spanning `pi_k`.
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.basis[k]
    }

    /// The orthogonal matrix whose columns are the flag vectors.
    pub fn basis_matrix(&self) -> Matrix {
        let d = self.dim();
        Matrix::from_fn(d, |i, k| self.basis[k][i])
    }

    /// Worst violation of `pi_i^2 = pi_i`, `pi_i pi_j = 0`, `sum pi_i = I`, `Tr pi_i = 1`.
    pub fn invariant_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        let mut total = Matrix::zeros(d);
        for (i, pi) in self.projections.iter().enumerate() {
            worst = worst.max(pi.matmul(pi).sub(pi.as_matrix()).max_abs());
            worst = worst.max((pi.trace() - 1.0).abs());
            for pj in &self.projections[i + 1..] {
                worst = worst.max(pi.matmul(pj).max_abs());
            }
            total = total.add(pi.as_matrix());
        }
        worst.max(total.sub(&Matrix::identity(d)).max_abs())
    }
}

/// Flips `u` so its largest-magnitude component (first one, on ties) is positive.
fn canonical_sign(mut u: Vec<f64>) -> Vec<f64> {
    let mut pivot = 0;
    for (i, v) in u.iter().enumerate() {
        if v.abs() > u[pivot].abs() {
            pivot = i;
        }
    }
    if u[pivot] < 0.0 {
        u.iter_mut().for_each(|v| *v = -*v);
    }
    u
}

/// Eigenvalues sorted non-increasing together with a matching eigenflag.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub r: Vec<f64>,
    pub flag: Flag,
}

impl Spectrum {
    pub fn new(r: Vec<f64>, flag: Flag) -> Result<Spectrum> {
        if r.len() != flag.dim() {
            return Err(Error::Input(format!(
                "{} eigenvalues for a flag of dimension {}",
                r.len(),
                flag.dim()
            )));
        }
        if r.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Input("eigenvalues must be sorted non-increasing".into()));
        }
        Ok(Spectrum { r, flag })
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    /// Consecutive gaps `r_k - r_{k+1}`.
    pub fn gaps(&self) -> Vec<f64> {
        self.r.windows(2).map(|w| w[0] - w[1]).collect()
    }
}

/// Cyclic Jacobi eigensolver.
///
/// Diagonal inputs perform no rotations, so their flag is the standard one;
/// equal eigenvalues keep the solver's output order (stable sort).
pub fn jacobi_eigh(x: &SymMatrix) -> Result<Spectrum> {
    let n = x.dim();
    let norm = x.frobenius_norm();
    let mut a = x.as_matrix().clone();
    let mut v = Matrix::identity(n);
    let target = 1e-15 * norm;

    let off = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += 2.0 * a[(p, q)] * a[(p, q)];
            }
        }
        s.sqrt()
    };

    let mut converged = off(&a) <= target;
    let mut sweep = 0;
    while !converged && sweep < MAX_SWEEPS {
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Below roundoff of both diagonal entries: annihilate without rotating.
                if sweep > 3 && apq.abs() < 1e-18 * (app.abs() + aqq.abs()) {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, p, q, c, s);
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        sweep += 1;
        converged = off(&a) <= target;
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
        )));
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entries during eigendecomposition".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let r: Vec<f64> = order.iter().map(|&k| a[(k, k)]).collect();
    let q = Matrix::from_fn(n, |i, k| v[(i, order[k])]);
    Ok(Spectrum {
        r,
        flag: Flag::from_columns(&q),
    })
}

/// Applies the rotation in the `(p, q)` plane to the off-diagonal entries of `a`.
fn rotate(a: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.dim();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        let new_p = c * akp - s * akq;
        let new_q = s * akp + c * akq;
        a[(k, p)] = new_p;
        a[(p, k)] = new_p;
        a[(k, q)] = new_q;
        a[(q, k)] = new_q;
    }
}

/// `sum_i r_i pi_i`.
pub fn reconstruct(s: &Spectrum) -> SymMatrix {
    let d = s.dim();
    SymMatrix::from_fn(d, |i, j| {
        s.r.iter()
            .zip(&s.flag.basis)
            .map(|(r, u)| r * u[i] * u[j])
            .sum()
    })
}

/// The tangent field `delta(a, xi)` at `flag`:
/// `delta_i = pi_i xi A_i + A_i xi pi_i` with `A_i = sum_j a_ij pi_j`.
pub fn delta_field(a: &Matrix, xi: &SymMatrix, flag: &Flag) -> Result<Vec<SymMatrix>> {
    let d = flag.dim();
    if a.dim() != d || xi.dim() != d {
        return Err(Error::Input("delta_field: dimension mismatch".into()));
    }
    let defect = a.skew_defect();
    if defect > 1e-12 {
        return Err(Error::Input(format!("generator is not skew-symmetric (defect {defect:e})")));
    }
    let xi_m = xi.as_matrix();
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let mut ai = Matrix::zeros(d);
        for j in 0..d {
            if a[(i, j)] != 0.0 {
                ai = ai.add(&flag.projections[j].as_matrix().scale(a[(i, j)]));
            }
        }
        let left = flag.projections[i].as_matrix().matmul(xi_m).matmul(&ai);
        out.push(left.add(&left.transpose()).symmetric_part());
    }
    Ok(out)
}

/// `w[a][b] = u_a^T xi u_b` in the flag's basis.
///
/// Cyclic trace monomials reduce to products of entries:
/// `Tr(pi_{a1} xi pi_{a2} xi ... pi_{am} xi) = w[a1][a2] w[a2][a3] ... w[am][a1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WMatrix {
    dim: usize,
    w: Vec<f64>,
}

impl WMatrix {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.w[a * self.dim + b]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value of the cyclic word `(a1, ..., am)`; the empty word is 1.
    pub fn trace_word(&self, word: &[usize]) -> f64 {
        let m = word.len();
        (0..m)
            .map(|p| self.get(word[p], word[(p + 1) % m]))
            .product()
    }
}

pub fn w_matrix(flag: &Flag, xi: &SymMatrix) -> Result<WMatrix> {
    let d = flag.dim();
    if xi.dim() != d {
        return Err(Error::Input("w_matrix: dimension mismatch".into()));
    }
    let xu: Vec<Vec<f64>> = flag
        .basis
        .iter()
        .map(|u| (0..d).map(|i| (0..d).map(|k| xi.get(i, k) * u[k]).sum()).collect())
        .collect();
    let mut w = vec![0.0; d * d];
    for a in 0..d {
        for b in a..d {
            let v: f64 = flag.basis[a].iter().zip(&xu[b]).map(|(x, y)| x * y).sum();
            w[a * d + b] = v;
            w[b * d + a] = v;
        }
    }
    Ok(WMatrix { dim: d, w })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(rows: &[&[f64]]) -> SymMatrix {
        SymMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn diagonal_input_keeps_standard_flag() {
        let s = jacobi_eigh(&SymMatrix::from_diag(&[5.0, 2.0, -1.0])).unwrap();
        assert_eq!(s.r, vec![5.0, 2.0, -1.0]);
        assert_eq!(s.flag, Flag::standard(3));
    }

    #[test]
    fn zero_matrix_canonical_flag() {
        let s = jacobi_eigh(&SymMatrix::zeros(3)).unwrap();
        assert_eq!(s.r, vec![0.0; 3]);
        assert_eq!(s.flag, Flag::standard(3));
    }

    #[test]
    fn unsorted_diagonal_is_reordered() {
        let s = jacobi_eigh(&SymMatrix::from_diag(&[-1.0, 5.0, 2.0])).unwrap();
        assert_eq!(s.r, vec![5.0, 2.0, -1.0]);
        assert_eq!(s.flag.vector(0), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        // Closed form for [[a, b], [b, a]]: eigenvalues a +- b, vectors (1, +-1)/sqrt 2.
        let s = jacobi_eigh(&sym(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        assert!((s.r[0] - 3.0).abs() < 1e-14 && (s.r[1] - 1.0).abs() < 1e-14);
        let p1 = s.flag.projection(0);
        let p2 = s.flag.projection(1);
        for (i, j, a, b) in [(0, 0, 0.5, 0.5), (0, 1, 0.5, -0.5), (1, 1, 0.5, 0.5)] {
            assert!((p1.get(i, j) - a).abs() < 1e-14);
            assert!((p2.get(i, j) - b).abs() < 1e-14);
        }
    }

    #[test]
    fn reconstruct_examples() {
        let s = jacobi_eigh(&sym(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        let x = reconstruct(&s);
        assert!(x.sub(&sym(&[&[2.0, 1.0], &[1.0, 2.0]])).max_abs() < 1e-14);

        let flag = jacobi_eigh(&sym(&[&[0.3, 0.7], &[0.7, -1.0]])).unwrap().flag;
        let zero = Spectrum::new(vec![0.0, 0.0], flag.clone()).unwrap();
        assert_eq!(reconstruct(&zero).max_abs(), 0.0);
        let ones = Spectrum::new(vec![1.0, 1.0], flag).unwrap();
        assert!(reconstruct(&ones).sub(&SymMatrix::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn delta_field_hand_example() {
        let mut a = Matrix::zeros(2);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = -1.0;
        let xi = sym(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let delta = delta_field(&a, &xi, &Flag::standard(2)).unwrap();
        assert_eq!(delta[0], xi);
        assert_eq!(delta[1], xi.scale(-1.0));
    }

    #[test]
    fn delta_field_zero_and_nonskew() {
        let xi = sym(&[&[1.0, 2.0], &[2.0, 3.0]]);
        let delta = delta_field(&Matrix::zeros(2), &xi, &Flag::standard(2)).unwrap();
        assert!(delta.iter().all(|m| m.max_abs() == 0.0));
        let bad = Matrix::identity(2);
        assert!(matches!(
            delta_field(&bad, &xi, &Flag::standard(2)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn w_matrix_examples() {
        let xi = sym(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let w = w_matrix(&Flag::standard(2), &xi).unwrap();
        assert_eq!((w.get(0, 0), w.get(0, 1), w.get(1, 1)), (0.0, 1.0, 0.0));
        let w = w_matrix(&Flag::standard(2), &SymMatrix::from_diag(&[3.0, 7.0])).unwrap();
        assert_eq!((w.get(0, 0), w.get(0, 1), w.get(1, 1)), (3.0, 0.0, 7.0));
        assert_eq!(w.trace_word(&[]), 1.0);
    }

    #[test]
    fn flag_from_projections_rejects_rank_two() {
        let p = SymMatrix::identity(2);
        let err = Flag::from_projections(vec![p, SymMatrix::zeros(2)]).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn flag_from_projections_roundtrip() {
        let s = jacobi_eigh(&sym(&[&[1.0, 0.4, 0.0], &[0.4, -2.0, 0.3], &[0.0, 0.3, 0.5]])).unwrap();
        let rebuilt = Flag::from_projections(s.flag.projections().to_vec()).unwrap();
        for k in 0..3 {
            for (a, b) in rebuilt.vector(k).iter().zip(s.flag.vector(k)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectrum_rejects_unsorted() {
        assert!(Spectrum::new(vec![1.0, 2.0], Flag::standard(2)).is_err());
    }
}
