//! Symmetric eigendecomposition by cyclic Jacobi rotations, plus the
//! spectral helpers built on it (PSD projection, numerical rank, SVD via
//! Gram matrices).

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// Sweep cap for the cyclic Jacobi iteration.
pub const MAX_SWEEPS: usize = 100;
/// Convergence threshold on the off-diagonal Frobenius norm, relative to ‖A‖_F.
pub const OFF_DIAG_TOL: f64 = 1e-12;
/// Relative asymmetry accepted before symmetrizing.
pub const ASYMMETRY_TOL: f64 = 1e-8;
/// Default relative threshold for [`numerical_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SymEigResult {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `eigenvalues`.
    pub eigenvectors: DenseMatrix,
}

impl SymEigResult {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// `V f(Λ) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = DenseMatrix::zeros(n, n);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let s = f(lam);
            if s == 0.0 {
                continue;
            }
            let vk = v.col(k);
            for j in 0..n {
                let sj = s * vk[j];
                if sj == 0.0 {
                    continue;
                }
                let col = out.col_mut(j);
                for i in 0..n {
                    col[i] += vk[i] * sj;
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_with(|x| x)
    }
}

fn checked_symmetric(a: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() {
        return Err(Error::dim(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::Breakdown(
            "non-finite entry in eigensolver input".into(),
        ));
    }
    let asym = a.asymmetry().unwrap_or(0.0);
    let bound = ASYMMETRY_TOL * a.frobenius_norm();
    if asym > bound {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            bound,
        });
    }
    a.symmetrized()
}

/// Eigendecomposition of a (near-)symmetric matrix.
pub fn sym_eig(a: &DenseMatrix) -> Result<SymEigResult> {
    let s = checked_symmetric(a)?;
    let n = s.rows();
    jacobi(s, DenseMatrix::identity(n))
}

/// Same as [`sym_eig`] but starts the rotations in `basis`, which should be
/// orthonormal (typically the eigenvectors of a nearby matrix). The Jacobi
/// sweeps then run on `basisᵀ A basis`, which is close to diagonal.
pub(crate) fn sym_eig_warm(a: &DenseMatrix, basis: &DenseMatrix) -> Result<SymEigResult> {
    let s = checked_symmetric(a)?;
    if basis.shape() != s.shape() {
        return Err(Error::dim("warm-start basis shape differs from matrix"));
    }
    let rotated = basis.tr_mul(&s.mul_unchecked(basis)).symmetrized()?;
    jacobi(rotated, basis.clone())
}

fn off_diagonal_norm(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for q in 0..n {
        for p in 0..q {
            s += a[(p, q)] * a[(p, q)];
        }
    }
    (2.0 * s).sqrt()
}

fn jacobi(mut a: DenseMatrix, mut v: DenseMatrix) -> Result<SymEigResult> {
    let n = a.rows();
    let scale = a.frobenius_norm();
    let tol = OFF_DIAG_TOL * scale;
    // Rotations on entries this small cannot move the off-diagonal norm
    // measurably, so they are skipped.
    let skip = 1e-3 * tol / (n.max(1) as f64);

    let mut sweeps = 0;
    let mut off = off_diagonal_norm(&a);
    while off > tol {
        if sweeps == MAX_SWEEPS {
            return Err(Error::EigNoConvergence {
                sweeps,
                off_norm: off,
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= skip {
                    continue;
                }
                rotate(&mut a, &mut v, p, q);
            }
        }
        sweeps += 1;
        off = off_diagonal_norm(&a);
        if !off.is_finite() {
            return Err(Error::Breakdown(
                "non-finite value during Jacobi sweep".into(),
            ));
        }
    }

    Ok(sorted_result(&a, v))
}

#[inline]
fn rotate(a: &mut DenseMatrix, v: &mut DenseMatrix, p: usize, q: usize) {
    let n = a.rows();
    let apq = a[(p, q)];
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
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
    // Columns p and q of V are contiguous in column-major storage.
    let data = v.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * n);
    let vp = &mut head[p * n..(p + 1) * n];
    let vq = &mut tail[..n];
    for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

fn sorted_result(a: &DenseMatrix, v: DenseMatrix) -> SymEigResult {
    let n = a.rows();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable: exact ties keep column order.
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));

    let eigenvalues = order.iter().map(|&k| a[(k, k)]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = v.col(src);
        // Sign convention: first entry of non-negligible magnitude is positive.
        let lead = col.iter().copied().find(|x| x.abs() > 1e-10).unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for (o, &x) in vectors.col_mut(dst).iter_mut().zip(col) {
            *o = sign * x;
        }
    }
    SymEigResult {
        eigenvalues,
        eigenvectors: vectors,
    }
}

/// Nearest PSD matrix (Frobenius) to `(A + Aᵀ)/2`.
pub fn psd_project(a: &DenseMatrix) -> Result<DenseMatrix> {
    let eig = sym_eig(a)?;
    project_from_eig(&eig)
}

pub(crate) fn project_from_eig(eig: &SymEigResult) -> Result<DenseMatrix> {
    eig.reconstruct_with(|x| x.max(0.0)).symmetrized()
}

/// Number of eigenvalues above `tol · max(1, λ_max)`.
pub fn numerical_rank(a: &DenseMatrix, tol: f64) -> Result<usize> {
    let eig = sym_eig(a)?;
    Ok(rank_from_eigenvalues(&eig.eigenvalues, tol))
}

pub(crate) fn rank_from_eigenvalues(eigenvalues: &[f64], tol: f64) -> usize {
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    let cut = tol * top.max(1.0);
    eigenvalues.iter().filter(|&&x| x > cut).count()
}

/// Thin singular value decomposition `A = U diag(σ) Vᵀ` computed from the
/// eigendecomposition of the smaller Gram matrix.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

pub fn thin_svd(a: &DenseMatrix) -> Result<Svd> {
    let (m, n) = a.shape();
    let k = m.min(n);
    if m <= n {
        let gram = a.mul_unchecked(&a.transpose());
        let eig = sym_eig(&gram)?;
        let sigma: Vec<f64> = eig.eigenvalues.iter().map(|&x| x.max(0.0).sqrt()).collect();
        let u = eig.eigenvectors;
        let at_u = a.tr_mul(&u);
        let v = complete_other_side(&at_u, &sigma, k);
        Ok(Svd {
            u,
            singular_values: sigma,
            v,
        })
    } else {
        let gram = a.tr_mul(a);
        let eig = sym_eig(&gram)?;
        let sigma: Vec<f64> = eig.eigenvalues.iter().map(|&x| x.max(0.0).sqrt()).collect();
        let v = eig.eigenvectors;
        let a_v = a.mul_unchecked(&v);
        let u = complete_other_side(&a_v, &sigma, k);
        Ok(Svd {
            u,
            singular_values: sigma,
            v,
        })
    }
}

/// Divides columns by σ; columns with negligible σ are left zero.
fn complete_other_side(scaled: &DenseMatrix, sigma: &[f64], k: usize) -> DenseMatrix {
    let top = sigma.first().copied().unwrap_or(0.0);
    let mut out = DenseMatrix::zeros(scaled.rows(), k);
    for j in 0..k {
        if sigma[j] > 1e-12 * top.max(f64::MIN_POSITIVE) {
            for (o, &x) in out.col_mut(j).iter_mut().zip(scaled.col(j)) {
                *o = x / sigma[j];
            }
        }
    }
    out
}

pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(thin_svd(a)?.singular_values)
}
