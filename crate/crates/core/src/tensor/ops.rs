//! Vectorization, Kronecker algebra and the selection/reshuffle operators
//! the lifted formulations are built from.
//!
//! `vec` stacks columns, so `vec(A W B) = (Bᵀ ⊗ A) vec(W)`. A square
//! `d²×d²` matrix is read as a fourth-order tensor whose row and column
//! pair indices are flattened the same way as `vec`: pair `(i, j)` sits at
//! position `i + j·d`.

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// Column-major stacking.
pub fn vec(m: &DenseMatrix) -> Vec<f64> {
    m.as_slice().to_vec()
}

/// Inverse of [`vec`].
pub fn mat(x: &[f64], rows: usize, cols: usize) -> Result<DenseMatrix> {
    if x.len() != rows * cols {
        return Err(Error::dim(format!(
            "cannot reshape a vector of length {} into {rows}x{cols}",
            x.len()
        )));
    }
    DenseMatrix::new(rows, cols, x.to_vec())
}

/// Standard Kronecker product: block `(i, j)` of the result is `a[i,j] * b`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = DenseMatrix::zeros(ra * rb, ca * cb);
    for ja in 0..ca {
        for ia in 0..ra {
            let s = a[(ia, ja)];
            if s == 0.0 {
                continue;
            }
            for jb in 0..cb {
                for ib in 0..rb {
                    out[(ia * rb + ib, ja * cb + jb)] = s * b[(ib, jb)];
                }
            }
        }
    }
    out
}

fn side_of_square_dim(n: usize, d: usize) -> Result<()> {
    if n != d * d {
        return Err(Error::dim(format!(
            "expected a {0}x{0} matrix (d = {d}), got side {n}",
            d * d
        )));
    }
    Ok(())
}

/// Reshuffle permutation: `R(M)[(i,k),(j,l)] = M[(i,j),(k,l)]`.
///
/// Maps `vec(A) vec(B)ᵀ` to `B ⊗ A`; it is an involution and self-adjoint,
/// so `⟨R(B ⊗ A), W ⊗ W⟩ = ⟨B ⊗ A, vec(W) vec(W)ᵀ⟩` for every `W`.
pub fn reshuffle(m: &DenseMatrix, d: usize) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::dim(format!(
            "reshuffle needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    side_of_square_dim(m.rows(), d)?;
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    for l in 0..d {
        for k in 0..d {
            for j in 0..d {
                for i in 0..d {
                    out[(i + k * d, j + l * d)] = m[(i + j * d, k + l * d)];
                }
            }
        }
    }
    Ok(out)
}

/// Standard basis matrix `E_ij` of size `d×d`.
pub fn basis(d: usize, i: usize, j: usize) -> DenseMatrix {
    let mut e = DenseMatrix::zeros(d, d);
    e[(i, j)] = 1.0;
    e
}

/// Diagonal contraction `Δ = Σ_ij E_ij ⊗ E_ij`, with `⟨Δ, A ⊗ B⟩ = ⟨A, B⟩`.
pub fn delta_operator(d: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(d * d, d * d);
    for j in 0..d {
        for i in 0..d {
            // E_ij ⊗ E_ij has its single one at (i·d + i, j·d + j).
            out[(i * d + i, j * d + j)] = 1.0;
        }
    }
    out
}

/// Block selectors splitting `R^d = R^{d_N} ⊕ R^{d_0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionPair {
    /// `[I_{d_N}; 0]`, shape `d×d_N`.
    pub p_u: DenseMatrix,
    /// `[0; I_{d_0}]`, shape `d×d_0`.
    pub p_v: DenseMatrix,
}

impl SelectionPair {
    pub fn d(&self) -> usize {
        self.p_u.rows()
    }

    /// `P_uᵀ W P_v`: the top-right `d_N×d_0` block of `W`.
    pub fn off_diagonal_block(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        let d = self.d();
        if w.shape() != (d, d) {
            return Err(Error::dim(format!(
                "expected a {d}x{d} matrix, got {}x{}",
                w.rows(),
                w.cols()
            )));
        }
        w.submatrix(0, self.p_u.cols(), self.p_u.cols(), self.p_v.cols())
    }
}

pub fn selection_pair(d_out: usize, d_in: usize) -> SelectionPair {
    let d = d_out + d_in;
    let p_u = DenseMatrix::from_fn(d, d_out, |i, j| if i == j { 1.0 } else { 0.0 });
    let p_v = DenseMatrix::from_fn(d, d_in, |i, j| if i == d_out + j { 1.0 } else { 0.0 });
    SelectionPair { p_u, p_v }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(r: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn vec_is_column_major() {
        let m = rows(&[&[1.0, 3.0], &[2.0, 4.0]]);
        assert_eq!(vec(&m), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vec(&DenseMatrix::identity(2)), vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn mat_inverts_vec_and_checks_length() {
        assert_eq!(
            mat(&[1.0, 0.0, 0.0, 1.0], 2, 2).unwrap(),
            DenseMatrix::identity(2)
        );
        assert!(matches!(mat(&[0.0; 5], 2, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn kron_of_identities() {
        assert_eq!(
            kron(&DenseMatrix::identity(2), &DenseMatrix::identity(3)),
            DenseMatrix::identity(6)
        );
    }

    #[test]
    fn kron_of_vectors_is_vec_of_outer() {
        let a = DenseMatrix::column(&[1.0, -2.0, 0.5]);
        let b = DenseMatrix::column(&[3.0, 4.0]);
        let k = kron(&a, &b);
        let outer = DenseMatrix::outer(b.as_slice(), a.as_slice());
        assert_eq!(k.as_slice(), vec(&outer).as_slice());
    }

    #[test]
    fn reshuffle_scalar_case_and_shape_error() {
        let m = rows(&[&[7.5]]);
        assert_eq!(reshuffle(&m, 1).unwrap(), m);
        assert!(reshuffle(&DenseMatrix::zeros(3, 3), 2).is_err());
        assert!(reshuffle(&DenseMatrix::zeros(4, 3), 2).is_err());
    }

    #[test]
    fn reshuffle_maps_vec_outer_to_swapped_kron() {
        let a = rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = rows(&[&[-1.0, 0.5], &[2.0, 0.0]]);
        let m = DenseMatrix::outer(&vec(&a), &vec(&b));
        assert_eq!(reshuffle(&m, 2).unwrap(), kron(&b, &a));
    }

    #[test]
    fn delta_small_cases() {
        assert_eq!(delta_operator(1), DenseMatrix::identity(1));
        for d in 1..5 {
            let i = DenseMatrix::identity(d);
            let v = delta_operator(d).inner(&kron(&i, &i)).unwrap();
            assert_eq!(v, d as f64);
        }
    }

    #[test]
    fn selection_pair_basics() {
        let s = selection_pair(1, 1);
        assert_eq!(s.p_u.as_slice(), &[1.0, 0.0]);
        assert_eq!(s.p_v.as_slice(), &[0.0, 1.0]);
        let s = selection_pair(2, 3);
        let sum = s
            .p_u
            .matmul(&s.p_u.transpose())
            .unwrap()
            .add(&s.p_v.matmul(&s.p_v.transpose()).unwrap())
            .unwrap();
        assert_eq!(sum, DenseMatrix::identity(5));
        assert_eq!(
            s.p_u.transpose().matmul(&s.p_v).unwrap(),
            DenseMatrix::zeros(2, 3)
        );
    }
}
