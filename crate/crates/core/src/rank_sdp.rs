//! Rank-constrained semidefinite form of the shallow problem and the
//! complementarity certificate for its rank constraint.
//!
//! A factor pair `(U, V)` lifts to `W = [U; V][U; V]ᵀ`, whose top-right block
//! is `U Vᵀ`. Conversely a PSD `W` of rank at most `r` factors back. The rank
//! bound itself is certified by a matrix `W′` with `tr(W′) = r`,
//! `0 ⪯ W′ ⪯ I` and `⟨W, I − W′⟩ ≤ 0`.

use crate::error::{Error, Result};
use crate::linnet::{FactorPoint, ProblemInstance};
use crate::report::ConstraintReport;
use crate::tensor::{
    rank_from_eigenvalues, selection_pair, sym_eig, DenseMatrix, SelectionPair, DEFAULT_RANK_TOL,
};

/// Absolute eigenvalue slack (scaled by `max(1, ‖W‖_F)`) for PSD inputs.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct BlockLift {
    w: DenseMatrix,
    selection: SelectionPair,
}

impl BlockLift {
    pub fn w(&self) -> &DenseMatrix {
        &self.w
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.w
    }

    pub fn selection(&self) -> &SelectionPair {
        &self.selection
    }

    fn d_out(&self) -> usize {
        self.selection.p_u.cols()
    }

    /// `U Uᵀ`
    pub fn a(&self) -> DenseMatrix {
        let k = self.d_out();
        self.w.submatrix(0, 0, k, k).expect("in range")
    }

    /// `V Vᵀ`
    pub fn b(&self) -> DenseMatrix {
        let k = self.d_out();
        let m = self.w.rows() - k;
        self.w.submatrix(k, k, m, m).expect("in range")
    }

    /// `U Vᵀ = P_uᵀ W P_v`
    pub fn m(&self) -> DenseMatrix {
        self.selection
            .off_diagonal_block(&self.w)
            .expect("square by construction")
    }
}

pub fn lift_to_block(p: &FactorPoint) -> Result<BlockLift> {
    let (d_out, d_in) = (p.u.rows(), p.v.rows());
    if p.u.cols() != p.v.cols() {
        return Err(Error::dim("U and V must have the same number of columns"));
    }
    let r = p.u.cols();
    let mut z = DenseMatrix::zeros(d_out + d_in, r);
    z.set_submatrix(0, 0, &p.u)?;
    z.set_submatrix(d_out, 0, &p.v)?;
    let w = z.mul_unchecked(&z.transpose()).symmetrized()?;
    Ok(BlockLift {
        w,
        selection: selection_pair(d_out, d_in),
    })
}

/// Splits a PSD `W` of rank `≤ r` as `Z Zᵀ` with `Z = V_r Λ_r^{1/2}` and
/// returns the row blocks of `Z` (the first `d_out` rows form `U`).
pub fn factor_block(w: &DenseMatrix, d_out: usize, r: usize) -> Result<FactorPoint> {
    if !w.is_square() || d_out > w.rows() {
        return Err(Error::dim(format!(
            "cannot split a {}x{} matrix with d_N = {d_out}",
            w.rows(),
            w.cols()
        )));
    }
    let eig = sym_eig(w)?;
    let slack = PSD_TOL * w.frobenius_norm().max(1.0);
    if eig.min_eigenvalue() < -slack {
        return Err(Error::NotPsd {
            min_eig: eig.min_eigenvalue(),
        });
    }
    let rank = rank_from_eigenvalues(&eig.eigenvalues, DEFAULT_RANK_TOL);
    if rank > r {
        return Err(Error::RankExceeds { rank, bound: r });
    }
    let d = w.rows();
    let mut z = DenseMatrix::zeros(d, r);
    for k in 0..r.min(d) {
        let s = eig.eigenvalues[k].max(0.0).sqrt();
        for (o, &x) in z.col_mut(k).iter_mut().zip(eig.eigenvectors.col(k)) {
            *o = s * x;
        }
    }
    FactorPoint::new(
        z.submatrix(0, 0, d_out, r)?,
        z.submatrix(d_out, 0, d - d_out, r)?,
    )
}

/// `(1/2n) ‖P_uᵀ W P_v X − Y‖_F²`
pub fn rank_sdp_objective(w: &DenseMatrix, inst: &ProblemInstance) -> Result<f64> {
    let sel = selection_pair(inst.d_out(), inst.d_in());
    let m = sel.off_diagonal_block(w)?;
    inst.loss_of_map(&m)
}

/// Feasible point `(W, W′, S)` of the complementarity formulation.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplementarityTriple {
    pub w: DenseMatrix,
    pub w_prime: DenseMatrix,
    pub s: DenseMatrix,
}

impl ComplementarityTriple {
    pub fn new(w: DenseMatrix, w_prime: DenseMatrix, s: DenseMatrix) -> Result<Self> {
        if !w.is_square() || w.shape() != w_prime.shape() || w.shape() != s.shape() {
            return Err(Error::dim(
                "W, W', S must be square matrices of the same size",
            ));
        }
        Ok(Self { w, w_prime, s })
    }

    pub fn d(&self) -> usize {
        self.w.rows()
    }
}

/// Rank certificate built from a projector: `W′` projects
/// onto the span of the top `r` eigenvectors of `W` (which contains its
/// range; zero-eigenvalue directions pad it in eigensolver order) and
/// `S = I − W′`.
pub fn projector_witness(w: &DenseMatrix, r: usize) -> Result<ComplementarityTriple> {
    let d = w.rows();
    if r > d {
        return Err(Error::dim(format!("rank bound {r} exceeds dimension {d}")));
    }
    let eig = sym_eig(w)?;
    let rank = rank_from_eigenvalues(&eig.eigenvalues, DEFAULT_RANK_TOL);
    if rank > r {
        return Err(Error::RankExceeds { rank, bound: r });
    }
    let basis = eig.eigenvectors.submatrix(0, 0, d, r)?;
    let w_prime = basis.mul_unchecked(&basis.transpose()).symmetrized()?;
    let s = DenseMatrix::identity(d).sub(&w_prime)?;
    ComplementarityTriple::new(w.symmetrized()?, w_prime, s)
}

/// Residuals of `tr(W′) = r`, `W′ + S = I`, `W, W′, S ⪰ 0` and `⟨W, S⟩ ≤ 0`.
pub fn check_complementarity(t: &ComplementarityTriple, r: usize, tol: f64) -> ConstraintReport {
    let mut rep = ConstraintReport::new();
    let d = t.d();
    rep.equality("tr(W') - r", t.w_prime.trace() - r as f64, tol);
    let id_resid = t
        .w_prime
        .add(&t.s)
        .and_then(|m| m.sub(&DenseMatrix::identity(d)))
        .map(|m| m.max_abs())
        .unwrap_or(f64::INFINITY);
    rep.equality("max|W' + S - I|", id_resid, tol);
    rep.psd("W psd", &t.w, tol, false);
    rep.psd("W' psd", &t.w_prime, tol, false);
    rep.psd("S psd", &t.s, tol, false);
    rep.upper("<W, S>", t.w.inner(&t.s).unwrap_or(f64::INFINITY), tol);
    rep
}
