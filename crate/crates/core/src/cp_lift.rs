//! Completely positive lifting of the complementarity formulation.
//!
//! The variable `z = [vec(W); vec(W′); vec(S)] ∈ R^{3d²}` ranges over
//! `K = vec(S₊ᵈ)³`. The complementarity problem is a QCQP in `z`
//! ([`FormulationData`]) whose lifted form is linear in `(z, Z)` with
//! `[1 zᵀ; z Z]` constrained to the completely positive cone over
//! `K̂ = R₊ × K`. Exact membership in that cone is not decidable here, so
//! points are either built from generators ([`atom_from_triple`],
//! [`mix_atoms`]) or checked against necessary PSD conditions only.
//!
//! The same point can be read in Kronecker form, with blocks
//! `𝒲_ij = Σ λ ω_i ⊗ ω_j` over atoms `ω = (1, W, W′, S)`; see
//! [`kron_blocks`] and [`check_constraints_kronecker`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linnet::ProblemInstance;
use crate::random::{self, Rng};
use crate::rank_sdp::{projector_witness, ComplementarityTriple};
use crate::report::{ConstraintReport, Membership};
use crate::tensor::{delta_operator, dot, kron, mat, reshuffle, selection_pair, vec, DenseMatrix};

/// Tolerance for matching the Kronecker-form objective against the
/// vectorized one, relative to `max(1, |objective|)`.
pub const OBJECTIVE_MATCH_TOL: f64 = 1e-10;
/// Tolerance on the convex weights summing to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// `K = vec(S₊ᵈ) × vec(S₊ᵈ) × vec(S₊ᵈ)` and its augmentation `K̂ = R₊ × K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ConeDescriptor {
    pub d: usize,
}

impl ConeDescriptor {
    /// Length of one `vec(S₊ᵈ)` block.
    pub fn block_len(&self) -> usize {
        self.d * self.d
    }

    /// Ambient dimension of `K`.
    pub fn dim(&self) -> usize {
        3 * self.block_len()
    }

    /// Side of the bordered matrix over `K̂`.
    pub fn lifted_side(&self) -> usize {
        1 + self.dim()
    }

    pub fn describe(&self) -> String {
        format!(
            "K = vec(S+^{0})^3 in R^{1}; K^ = R+ x K; lifted variable is {2}x{2}",
            self.d,
            self.dim(),
            self.lifted_side()
        )
    }
}

/// QCQP data: minimize `zᵀQz + qᵀz + h` subject to `Az = b`,
/// `zᵀQ̄z + q̄ᵀz + h̄ ≤ 0`, `z ∈ K`.
#[derive(Clone, Debug)]
pub struct FormulationData {
    pub q_mat: DenseMatrix,
    pub q_vec: Vec<f64>,
    pub h: f64,
    pub qbar_mat: DenseMatrix,
    pub qbar_vec: Vec<f64>,
    pub hbar: f64,
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub cone: ConeDescriptor,
    pub r: usize,
}

/// `P_v X Xᵀ P_vᵀ ⊗ P_u P_uᵀ`: the quadratic objective coefficient acting on
/// `vec(W) vec(W)ᵀ`.
pub fn objective_kernel(inst: &ProblemInstance) -> DenseMatrix {
    let sel = selection_pair(inst.d_out(), inst.d_in());
    let px = sel.p_v.mul_unchecked(inst.x());
    let left = px.mul_unchecked(&px.transpose());
    let right = sel.p_u.mul_unchecked(&sel.p_u.transpose());
    kron(&left, &right)
}

/// `vec(P_u Y Xᵀ P_vᵀ)`: the linear objective coefficient on `vec(W)`.
pub fn objective_linear_term(inst: &ProblemInstance) -> Vec<f64> {
    let sel = selection_pair(inst.d_out(), inst.d_in());
    let m = sel
        .p_u
        .mul_unchecked(inst.y())
        .mul_unchecked(&inst.x().transpose())
        .mul_unchecked(&sel.p_v.transpose());
    vec(&m)
}

fn target_energy(inst: &ProblemInstance) -> f64 {
    let f = inst.y().frobenius_norm();
    f * f
}

fn vec_identity(d: usize) -> Vec<f64> {
    vec(&DenseMatrix::identity(d))
}

pub fn assemble_qcqp(inst: &ProblemInstance) -> FormulationData {
    let d = inst.d();
    let cone = ConeDescriptor { d };
    let m = cone.block_len();
    let p = cone.dim();
    let n = inst.n() as f64;

    let mut q_mat = DenseMatrix::zeros(p, p);
    let kernel = objective_kernel(inst).scale(1.0 / (2.0 * n));
    q_mat
        .set_submatrix(0, 0, &kernel)
        .expect("fits in first block");

    let mut q_vec = vec![0.0; p];
    for (o, c) in q_vec.iter_mut().zip(objective_linear_term(inst)) {
        *o = -c / n;
    }
    let h = target_energy(inst) / (2.0 * n);

    let mut qbar_mat = DenseMatrix::zeros(p, p);
    for k in 0..m {
        qbar_mat[(k, m + k)] = -0.5;
        qbar_mat[(m + k, k)] = -0.5;
    }
    let vec_i = vec_identity(d);
    let mut qbar_vec = vec![0.0; p];
    qbar_vec[..m].copy_from_slice(&vec_i);

    let mut a = DenseMatrix::zeros(1 + m, p);
    for (k, &x) in vec_i.iter().enumerate() {
        a[(0, m + k)] = x;
    }
    for k in 0..m {
        a[(1 + k, m + k)] = 1.0;
        a[(1 + k, 2 * m + k)] = 1.0;
    }
    let mut b = Vec::with_capacity(1 + m);
    b.push(inst.r() as f64);
    b.extend_from_slice(&vec_i);

    FormulationData {
        q_mat,
        q_vec,
        h,
        qbar_mat,
        qbar_vec,
        hbar: 0.0,
        a,
        b,
        cone,
        r: inst.r(),
    }
}

impl FormulationData {
    fn quad(m: &DenseMatrix, z: &[f64]) -> f64 {
        dot(z, &m.mat_vec(z).expect("dimension checked by caller"))
    }

    fn check_len(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.cone.dim() {
            return Err(Error::dim(format!(
                "z has length {}, expected {}",
                z.len(),
                self.cone.dim()
            )));
        }
        Ok(())
    }

    /// `zᵀQz + qᵀz + h`
    pub fn objective(&self, z: &[f64]) -> Result<f64> {
        self.check_len(z)?;
        Ok(Self::quad(&self.q_mat, z) + dot(&self.q_vec, z) + self.h)
    }

    /// `zᵀQ̄z + q̄ᵀz + h̄`
    pub fn quadratic_constraint(&self, z: &[f64]) -> Result<f64> {
        self.check_len(z)?;
        Ok(Self::quad(&self.qbar_mat, z) + dot(&self.qbar_vec, z) + self.hbar)
    }

    /// `Az − b`
    pub fn affine_residual(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z)?;
        let az = self.a.mat_vec(z)?;
        Ok(az.iter().zip(&self.b).map(|(x, y)| x - y).collect())
    }

    /// `⟨Q, Z⟩ + qᵀz + h`
    pub fn lifted_objective(&self, pt: &LiftedPoint) -> Result<f64> {
        self.check_len(&pt.z)?;
        Ok(self.q_mat.inner(&pt.big_z)? + dot(&self.q_vec, &pt.z) + self.h)
    }

    /// `⟨Q̄, Z⟩ + q̄ᵀz + h̄`
    pub fn lifted_quadratic_constraint(&self, pt: &LiftedPoint) -> Result<f64> {
        self.check_len(&pt.z)?;
        Ok(self.qbar_mat.inner(&pt.big_z)? + dot(&self.qbar_vec, &pt.z) + self.hbar)
    }
}

/// One generator in a mixture, with its convex weight.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedAtom {
    pub weight: f64,
    pub tag: String,
    pub triple: ComplementarityTriple,
}

/// First- and second-order lifted variables `(z, Z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedPoint {
    d: usize,
    pub z: Vec<f64>,
    pub big_z: DenseMatrix,
    /// Generator decomposition; empty for points read from a solver.
    pub atoms: Vec<WeightedAtom>,
}

impl LiftedPoint {
    /// Wraps a bordered matrix `[1 zᵀ; z Z]` produced elsewhere (no atom
    /// decomposition). The matrix must be symmetric up to rounding.
    pub fn from_bordered(bordered: &DenseMatrix, d: usize) -> Result<Self> {
        let side = 1 + 3 * d * d;
        if bordered.shape() != (side, side) {
            return Err(Error::dim(format!(
                "bordered matrix must be {side}x{side}, got {}x{}",
                bordered.rows(),
                bordered.cols()
            )));
        }
        let sym = bordered.symmetrized()?;
        let z = (1..side).map(|i| sym[(i, 0)]).collect();
        let big_z = sym.submatrix(1, 1, side - 1, side - 1)?;
        Ok(Self {
            d,
            z,
            big_z,
            atoms: Vec::new(),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn has_atoms(&self) -> bool {
        !self.atoms.is_empty()
    }

    /// `z_i` for `i ∈ {1, 2, 3}`.
    pub fn z_block(&self, i: usize) -> &[f64] {
        assert!((1..=3).contains(&i), "block index {i} out of range");
        let m = self.d * self.d;
        &self.z[(i - 1) * m..i * m]
    }

    /// `mat(z_i)`
    pub fn z_mat(&self, i: usize) -> DenseMatrix {
        mat(self.z_block(i), self.d, self.d).expect("block has d² entries")
    }

    /// `Z_ij` for `i, j ∈ {1, 2, 3}`.
    pub fn z_pair(&self, i: usize, j: usize) -> DenseMatrix {
        assert!((1..=3).contains(&i) && (1..=3).contains(&j));
        let m = self.d * self.d;
        self.big_z
            .submatrix((i - 1) * m, (j - 1) * m, m, m)
            .expect("in range")
    }

    /// `[1 zᵀ; z Z]`
    pub fn bordered(&self) -> DenseMatrix {
        let p = self.z.len();
        let mut out = DenseMatrix::zeros(p + 1, p + 1);
        out[(0, 0)] = 1.0;
        for (k, &x) in self.z.iter().enumerate() {
            out[(k + 1, 0)] = x;
            out[(0, k + 1)] = x;
        }
        out.set_submatrix(1, 1, &self.big_z).expect("fits");
        out
    }
}

/// Rank-one generator built from `z = [vec(W); vec(W′); vec(S)]`.
pub fn atom_from_triple(t: &ComplementarityTriple) -> LiftedPoint {
    atom_with_tag(t, "atom")
}

pub fn atom_with_tag(t: &ComplementarityTriple, tag: &str) -> LiftedPoint {
    let mut z = vec(&t.w);
    z.extend(vec(&t.w_prime));
    z.extend(vec(&t.s));
    let big_z = DenseMatrix::outer(&z, &z);
    LiftedPoint {
        d: t.d(),
        z,
        big_z,
        atoms: vec![WeightedAtom {
            weight: 1.0,
            tag: tag.to_string(),
            triple: t.clone(),
        }],
    }
}

/// Convex combination of bordered matrices. The result carries the
/// flattened atom list (empty if any input lacks a decomposition).
pub fn mix_atoms(points: &[LiftedPoint], weights: &[f64]) -> Result<LiftedPoint> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::InvalidWeights(format!(
            "{} points with {} weights",
            points.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidWeights(format!(
            "weight {w} is not a nonnegative number"
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidWeights(format!(
            "weights sum to {total}, not 1"
        )));
    }
    let d = points[0].d;
    if points.iter().any(|p| p.d != d) {
        return Err(Error::dim("mixed points have different dimensions"));
    }

    let mut z = vec![0.0; points[0].z.len()];
    let mut big_z = DenseMatrix::zeros(z.len(), z.len());
    for (p, &w) in points.iter().zip(weights) {
        for (o, &x) in z.iter_mut().zip(&p.z) {
            *o += w * x;
        }
        big_z.axpy(w, &p.big_z)?;
    }
    let decomposed = points.iter().all(LiftedPoint::has_atoms);
    let atoms = if decomposed {
        points
            .iter()
            .zip(weights)
            .flat_map(|(p, &w)| {
                p.atoms.iter().map(move |a| WeightedAtom {
                    weight: w * a.weight,
                    ..a.clone()
                })
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(LiftedPoint {
        d,
        z,
        big_z: big_z.symmetrized()?,
        atoms,
    })
}

fn check_point(pt: &LiftedPoint, inst: &ProblemInstance) -> Result<()> {
    if pt.d != inst.d() || pt.z.len() != 3 * pt.d * pt.d {
        return Err(Error::dim(format!(
            "lifted point has d = {}, instance has d = {}",
            pt.d,
            inst.d()
        )));
    }
    Ok(())
}

/// Vectorized-form objective
/// `(1/2n)(⟨P_vXXᵀP_vᵀ ⊗ P_uP_uᵀ, Z₁₁⟩ − 2⟨vec(P_uYXᵀP_vᵀ), z₁⟩ + ‖Y‖²)`.
pub fn eval_objective_vectorized(pt: &LiftedPoint, inst: &ProblemInstance) -> Result<f64> {
    check_point(pt, inst)?;
    let quad = objective_kernel(inst).inner(&pt.z_pair(1, 1))?;
    let lin = dot(&objective_linear_term(inst), pt.z_block(1));
    Ok((quad - 2.0 * lin + target_energy(inst)) / (2.0 * inst.n() as f64))
}

pub mod names {
    pub const TRACE_W_PRIME: &str = "(i) tr(mat(z2)) - r";
    pub const TRACE_SQUARED: &str = "(ii) <vec(I)vec(I)^T, Z22> - r^2";
    pub const PARTITION: &str = "(iii) max|z2 + z3 - vec(I)|";
    pub const PARTITION_SQUARED: &str = "(iv) max|diag(Z22+Z23+Z32+Z33) - vec(I)|";
    pub const COMPLEMENTARITY: &str = "(v) tr(mat(z1)) - tr(Z12)";
    pub const BORDERED_PSD: &str = "(vi) bordered matrix psd";
    pub const Z1_PSD: &str = "(vi) mat(z1) psd";
    pub const Z2_PSD: &str = "(vi) mat(z2) psd";
    pub const Z3_PSD: &str = "(vi) mat(z3) psd";

    pub const K_TRACE_W02: &str = "tr(W02) - r";
    pub const K_TRACE_W22: &str = "tr(W22) - r^2";
    pub const K_PARTITION: &str = "max_ij |<E_ij, W02+W03> - delta_ij|";
    pub const K_PARTITION_SQUARED: &str = "max_ij |<E_ij (x) E_ij, W22+W23+W32+W33> - delta_ij|";
    pub const K_COMPLEMENTARITY: &str = "tr(W01) - <Delta, W12>";
    pub const K_OBJECTIVE: &str = "objective: kronecker - vectorized";
    pub const K_W01_PSD: &str = "W01 psd";
    pub const K_W02_PSD: &str = "W02 psd";
    pub const K_W03_PSD: &str = "W03 psd";

    /// Constraint rows that must agree between the two representations.
    pub const MATCHED: [(&str, &str); 5] = [
        (TRACE_W_PRIME, K_TRACE_W02),
        (TRACE_SQUARED, K_TRACE_W22),
        (PARTITION, K_PARTITION),
        (PARTITION_SQUARED, K_PARTITION_SQUARED),
        (COMPLEMENTARITY, K_COMPLEMENTARITY),
    ];
}

fn atoms_in_cone(pt: &LiftedPoint, tol: f64) -> bool {
    pt.has_atoms()
        && pt.atoms.iter().all(|a| {
            let mut r = ConstraintReport::new();
            r.psd("W", &a.triple.w, tol, true);
            r.psd("W'", &a.triple.w_prime, tol, true);
            r.psd("S", &a.triple.s, tol, true);
            a.weight >= 0.0 && r.passed()
        })
}

/// Residuals of the five linear constraint families of the vectorized lifted
/// program plus the PSD surrogates for cone membership.
pub fn check_constraints_vectorized(
    pt: &LiftedPoint,
    inst: &ProblemInstance,
    tol: f64,
) -> ConstraintReport {
    let mut rep = ConstraintReport::new();
    if let Err(e) = check_point(pt, inst) {
        rep.equality(format!("dimensions ({e})"), f64::INFINITY, tol);
        return rep;
    }
    let d = pt.d;
    let m = d * d;
    let r = inst.r() as f64;
    let vec_i = vec_identity(d);

    rep.equality(names::TRACE_W_PRIME, pt.z_mat(2).trace() - r, tol);

    let diag_idx: Vec<usize> = (0..d).map(|i| i + i * d).collect();
    let z22 = pt.z_pair(2, 2);
    let mut trace_sq = 0.0;
    for &k in &diag_idx {
        for &l in &diag_idx {
            trace_sq += z22[(k, l)];
        }
    }
    rep.equality(names::TRACE_SQUARED, trace_sq - r * r, tol);

    let partition = (0..m)
        .map(|k| (pt.z_block(2)[k] + pt.z_block(3)[k] - vec_i[k]).abs())
        .fold(0.0, f64::max);
    rep.equality(names::PARTITION, partition, tol);

    let off = 2 * m;
    let partition_sq = (0..m)
        .map(|k| {
            let s = pt.big_z[(m + k, m + k)]
                + pt.big_z[(m + k, off + k)]
                + pt.big_z[(off + k, m + k)]
                + pt.big_z[(off + k, off + k)];
            (s - vec_i[k]).abs()
        })
        .fold(0.0, f64::max);
    rep.equality(names::PARTITION_SQUARED, partition_sq, tol);

    let trace_z12: f64 = (0..m).map(|k| pt.big_z[(k, m + k)]).sum();
    rep.upper(names::COMPLEMENTARITY, pt.z_mat(1).trace() - trace_z12, tol);

    rep.psd(names::BORDERED_PSD, &pt.bordered(), tol, true);
    rep.psd(names::Z1_PSD, &pt.z_mat(1), tol, true);
    rep.psd(names::Z2_PSD, &pt.z_mat(2), tol, true);
    rep.psd(names::Z3_PSD, &pt.z_mat(3), tol, true);

    rep.membership = Some(if atoms_in_cone(pt, tol) {
        Membership::AtomCertified
    } else {
        Membership::SurrogateChecked
    });
    rep
}

/// Matrix-indexed lifted blocks `𝒲_ij`, `i, j ∈ {0, 1, 2, 3}`.
#[derive(Clone, Debug)]
pub struct KronBlocks {
    d: usize,
    first_order: [DenseMatrix; 3],
    second_order: Vec<DenseMatrix>,
}

impl KronBlocks {
    pub fn d(&self) -> usize {
        self.d
    }

    /// `𝒲_ij`; `𝒲_00` is the `1×1` matrix `[1]` and `𝒲_i0 = 𝒲_0i`.
    pub fn block(&self, i: usize, j: usize) -> DenseMatrix {
        assert!(i <= 3 && j <= 3, "block index out of range");
        match (i, j) {
            (0, 0) => DenseMatrix::identity(1),
            (0, k) | (k, 0) => self.first_order[k - 1].clone(),
            _ => self.second_order[(i - 1) * 3 + (j - 1)].clone(),
        }
    }
}

/// Kronecker-form blocks of a generator-decomposed point:
/// `𝒲_0j = mat(z_j)` and `𝒲_ij = Σ λ ω_i ⊗ ω_j`.
pub fn kron_blocks(pt: &LiftedPoint) -> Result<KronBlocks> {
    if !pt.has_atoms() {
        return Err(Error::Unsupported(
            "Kronecker blocks are derived from an atom decomposition; this point has none".into(),
        ));
    }
    let d = pt.d;
    let first_order = [pt.z_mat(1), pt.z_mat(2), pt.z_mat(3)];
    let mut second_order = vec![DenseMatrix::zeros(d * d, d * d); 9];
    for atom in &pt.atoms {
        let omega = [&atom.triple.w, &atom.triple.w_prime, &atom.triple.s];
        for i in 0..3 {
            for j in 0..3 {
                second_order[i * 3 + j].axpy(atom.weight, &kron(omega[i], omega[j]))?;
            }
        }
    }
    Ok(KronBlocks {
        d,
        first_order,
        second_order,
    })
}

/// `max_ij ‖R(Z_ji) − 𝒲_ij‖_max`. Since `R(vec(A) vec(B)ᵀ) = B ⊗ A`, the
/// reshuffled vectorized block `Z_ji` is the Kronecker block `𝒲_ij`.
pub fn kron_consistency(pt: &LiftedPoint, blocks: &KronBlocks) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 1..=3 {
        for j in 1..=3 {
            let reshuffled = reshuffle(&pt.z_pair(j, i), pt.d)?;
            worst = worst.max(reshuffled.sub(&blocks.block(i, j))?.max_abs());
        }
    }
    Ok(worst)
}

/// Kronecker-form objective
/// `(1/2n)(⟨R(P_vXXᵀP_vᵀ ⊗ P_uP_uᵀ), 𝒲₁₁⟩ − 2⟨P_uYXᵀP_vᵀ, 𝒲₀₁⟩ + ‖Y‖²)`.
pub fn eval_objective_kronecker(blocks: &KronBlocks, inst: &ProblemInstance) -> Result<f64> {
    if blocks.d != inst.d() {
        return Err(Error::dim("block dimension differs from instance"));
    }
    let coeff = reshuffle(&objective_kernel(inst), blocks.d)?;
    let quad = coeff.inner(&blocks.block(1, 1))?;
    let lin = dot(&objective_linear_term(inst), blocks.block(0, 1).as_slice());
    Ok((quad - 2.0 * lin + target_energy(inst)) / (2.0 * inst.n() as f64))
}

/// Residuals of the Kronecker-form constraints, the match between the two
/// objective expressions, and PSD surrogates on the first-order blocks.
pub fn check_constraints_kronecker(
    pt: &LiftedPoint,
    inst: &ProblemInstance,
    tol: f64,
) -> ConstraintReport {
    let mut rep = ConstraintReport::new();
    if let Err(e) = check_point(pt, inst) {
        rep.equality(format!("dimensions ({e})"), f64::INFINITY, tol);
        return rep;
    }
    let blocks = match kron_blocks(pt) {
        Ok(b) => b,
        Err(e) => {
            rep.equality(format!("kronecker blocks ({e})"), f64::INFINITY, tol);
            return rep;
        }
    };
    let d = pt.d;
    let r = inst.r() as f64;
    let w01 = blocks.block(0, 1);
    let w02 = blocks.block(0, 2);
    let w03 = blocks.block(0, 3);

    rep.equality(names::K_TRACE_W02, w02.trace() - r, tol);
    rep.equality(names::K_TRACE_W22, blocks.block(2, 2).trace() - r * r, tol);

    let mut partition: f64 = 0.0;
    let mut partition_sq: f64 = 0.0;
    let sum_second = {
        let mut s = blocks.block(2, 2);
        for (i, j) in [(2, 3), (3, 2), (3, 3)] {
            s.axpy(1.0, &blocks.block(i, j)).expect("same shape");
        }
        s
    };
    for i in 0..d {
        for j in 0..d {
            let delta = if i == j { 1.0 } else { 0.0 };
            // ⟨E_ij, A⟩ = A[i,j]; ⟨E_ij ⊗ E_ij, B⟩ = B[i·d+i, j·d+j].
            partition = partition.max((w02[(i, j)] + w03[(i, j)] - delta).abs());
            partition_sq = partition_sq.max((sum_second[(i * d + i, j * d + j)] - delta).abs());
        }
    }
    rep.equality(names::K_PARTITION, partition, tol);
    rep.equality(names::K_PARTITION_SQUARED, partition_sq, tol);

    let contraction = delta_operator(d)
        .inner(&blocks.block(1, 2))
        .expect("same shape");
    rep.upper(names::K_COMPLEMENTARITY, w01.trace() - contraction, tol);

    let objective_gap = match (
        eval_objective_kronecker(&blocks, inst),
        eval_objective_vectorized(pt, inst),
    ) {
        (Ok(k), Ok(v)) => ((k - v), OBJECTIVE_MATCH_TOL * v.abs().max(1.0)),
        _ => (f64::INFINITY, OBJECTIVE_MATCH_TOL),
    };
    rep.equality(names::K_OBJECTIVE, objective_gap.0, objective_gap.1);

    rep.psd(names::K_W01_PSD, &w01, tol, true);
    rep.psd(names::K_W02_PSD, &w02, tol, true);
    rep.psd(names::K_W03_PSD, &w03, tol, true);

    rep.membership = Some(if atoms_in_cone(pt, tol) {
        Membership::AtomCertified
    } else {
        Membership::SurrogateChecked
    });
    rep
}

/// Random PSD `W` of rank at most `r` together with its projector witness.
pub fn sample_feasible_triple(rng: &mut Rng, d: usize, r: usize) -> Result<ComplementarityTriple> {
    let w = random::low_rank_psd(rng, d, r);
    projector_witness(&w, r)
}

/// Samples feasible triples and confirms the quadratic constraint is tight
/// (equal to zero, never strictly negative) at each of them. The first
/// sample is always `W = 0`.
pub fn verify_lifting_hypothesis(
    inst: &ProblemInstance,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<ConstraintReport> {
    if samples == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    let data = assemble_qcqp(inst);
    let d = inst.d();
    let r = inst.r();
    let mut rng = random::seeded(seed);
    let mut max_abs: f64 = 0.0;
    let mut min_value = f64::INFINITY;
    let mut infeasible = 0usize;
    for k in 0..samples {
        let t = if k == 0 {
            projector_witness(&DenseMatrix::zeros(d, d), r)?
        } else {
            sample_feasible_triple(&mut rng, d, r)?
        };
        if !crate::rank_sdp::check_complementarity(&t, r, tol).passed() {
            infeasible += 1;
            continue;
        }
        let atom = atom_from_triple(&t);
        let value = data.quadratic_constraint(&atom.z)?;
        max_abs = max_abs.max(value.abs());
        min_value = min_value.min(value);
    }
    let mut rep = ConstraintReport::new();
    rep.equality("infeasible samples", infeasible as f64, 0.0);
    rep.equality("max |z^T Qbar z + qbar^T z + hbar|", max_abs, tol);
    rep.upper(
        "strict slack: -min(z^T Qbar z + qbar^T z + hbar)",
        -min_value,
        tol,
    );
    Ok(rep)
}
