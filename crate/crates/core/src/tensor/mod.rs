//! Dense matrix kernel: storage, vec/Kronecker algebra, reshuffle and
//! selection operators, and the Jacobi eigensolver.

mod eig;
mod matrix;
mod ops;

pub use eig::{
    numerical_rank, psd_project, singular_values, sym_eig, thin_svd, Svd, SymEigResult,
    ASYMMETRY_TOL, DEFAULT_RANK_TOL, MAX_SWEEPS, OFF_DIAG_TOL,
};
pub(crate) use eig::{project_from_eig, rank_from_eigenvalues, sym_eig_warm};
pub use matrix::{dot, norm2, DenseMatrix};
pub use ops::{basis, delta_operator, kron, mat, reshuffle, selection_pair, vec, SelectionPair};
