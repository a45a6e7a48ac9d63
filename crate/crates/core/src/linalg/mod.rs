//! Symmetric-matrix arithmetic, the cyclic Jacobi eigensolver, flags and the
//! flag tangent fields.

mod eigen;
mod matrix;
mod random;

pub use eigen::{delta_field, jacobi_eigh, reconstruct, w_matrix, Flag, Spectrum, WMatrix, FLAG_TOL};
pub use matrix::{Matrix, MatrixJson, SymMatrix};
pub use random::{
    conjugate, rand_direction_with, rand_sym, rand_sym_with, random_orthogonal, rng_from_seed,
    spectrum_with_gaps, sym_with_spectrum, sym_with_spectrum_with, with_eigenframe,
};
