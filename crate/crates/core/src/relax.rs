//! PSD outer relaxation of the lifted program and an ADMM solver for it.
//!
//! The completely positive constraint is replaced by necessary conditions:
//! the bordered matrix `[1 zᵀ; z Z]` is PSD and each `mat(z_i)` is PSD.
//! The variable is block diagonal with blocks
//! `[bordered (1+3d²), S₁ (d), S₂ (d), S₃ (d), slack (1)]`, where the `S_i`
//! are tied to `mat(z_i)` by linking equalities and the slack turns the
//! complementarity inequality into an equality.
//!
//! Solve form: minimize `⟨C, X⟩ + offset` subject to `𝒜(X) = b`, `X ⪰ 0`.

use serde::{Deserialize, Serialize};

use crate::cp_lift::FormulationData;
use crate::error::{Error, Result};
use crate::linnet::{oracle_opt, ProblemInstance};
use crate::random;
use crate::tensor::{project_from_eig, sym_eig, sym_eig_warm, DenseMatrix};

/// Entry `(i, j)`, `i <= j`, of a symmetric coefficient matrix on one
/// block; it stands for both `(i, j)` and `(j, i)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SymEntry {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Equality,
    /// Originally `≤ rhs`; a nonnegative slack entry has been added.
    Inequality,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AffineConstraint {
    pub family: &'static str,
    pub entries: Vec<SymEntry>,
    pub rhs: f64,
    pub kind: ConstraintKind,
}

pub mod family {
    pub const BORDER: &str = "border";
    pub const TRACE: &str = "(i) trace";
    pub const TRACE_SQUARED: &str = "(ii) trace squared";
    pub const PARTITION: &str = "(iii) partition";
    pub const PARTITION_SQUARED: &str = "(iv) partition squared";
    pub const COMPLEMENTARITY: &str = "(v) complementarity";
    pub const LINK: &str = "link";
}

pub const BORDERED_BLOCK: usize = 0;
pub const SLACK_BLOCK: usize = 4;

#[derive(Clone, Debug, Serialize)]
pub struct RelaxationProblem {
    pub d: usize,
    pub block_sizes: Vec<usize>,
    pub objective: Vec<SymEntry>,
    pub objective_offset: f64,
    pub constraints: Vec<AffineConstraint>,
    /// Blocks constrained PSD (all of them; the 1×1 slack block is `≥ 0`).
    pub psd_blocks: Vec<usize>,
}

impl RelaxationProblem {
    pub fn count(&self, fam: &str) -> usize {
        self.constraints.iter().filter(|c| c.family == fam).count()
    }

    /// Number of constraints coming from the lifted program's five
    /// families, excluding border and linking rows.
    pub fn lifted_family_count(&self) -> usize {
        [
            family::TRACE,
            family::TRACE_SQUARED,
            family::PARTITION,
            family::PARTITION_SQUARED,
            family::COMPLEMENTARITY,
        ]
        .iter()
        .map(|f| self.count(f))
        .sum()
    }

    /// `⟨A, X⟩` for a coefficient list over block matrices.
    pub fn apply(entries: &[SymEntry], blocks: &[DenseMatrix]) -> f64 {
        entries
            .iter()
            .map(|e| {
                let x = blocks[e.block][(e.i, e.j)];
                if e.i == e.j {
                    e.value * x
                } else {
                    e.value * (x + blocks[e.block][(e.j, e.i)])
                }
            })
            .sum()
    }

    pub fn objective_value(&self, blocks: &[DenseMatrix]) -> f64 {
        Self::apply(&self.objective, blocks) + self.objective_offset
    }

    /// Max absolute violation of the affine constraints.
    pub fn affine_violation(&self, blocks: &[DenseMatrix]) -> f64 {
        self.constraints
            .iter()
            .map(|c| (Self::apply(&c.entries, blocks) - c.rhs).abs())
            .fold(0.0, f64::max)
    }

    /// Block variable encoding a lifted point `(z, Z)`: the bordered matrix,
    /// `mat(z_i)` in the three small blocks, and the complementarity slack.
    pub fn embed(&self, bordered: &DenseMatrix) -> Result<Vec<DenseMatrix>> {
        let side = self.block_sizes[BORDERED_BLOCK];
        if bordered.shape() != (side, side) {
            return Err(Error::dim(format!(
                "bordered matrix must be {side}x{side}, got {}x{}",
                bordered.rows(),
                bordered.cols()
            )));
        }
        let d = self.d;
        let m = d * d;
        let mut blocks = vec![bordered.clone()];
        for b in 0..3 {
            blocks.push(DenseMatrix::from_fn(d, d, |i, j| {
                bordered[(1 + b * m + i + j * d, 0)]
            }));
        }
        blocks.push(DenseMatrix::zeros(1, 1));
        let compl = self
            .constraints
            .iter()
            .find(|c| c.family == family::COMPLEMENTARITY)
            .expect("built with a complementarity row");
        let without_slack: Vec<SymEntry> = compl
            .entries
            .iter()
            .copied()
            .filter(|e| e.block != SLACK_BLOCK)
            .collect();
        blocks[SLACK_BLOCK][(0, 0)] = compl.rhs - Self::apply(&without_slack, &blocks);
        Ok(blocks)
    }
}

fn push_dense_sym(entries: &mut Vec<SymEntry>, m: &DenseMatrix, offset: usize) {
    for j in 0..m.cols() {
        for i in 0..=j {
            let v = m[(i, j)];
            if v != 0.0 {
                entries.push(SymEntry {
                    block: BORDERED_BLOCK,
                    i: offset + i,
                    j: offset + j,
                    value: v,
                });
            }
        }
    }
}

/// Linear term `gᵀz` as bordered-matrix entries `(0, 1+k)` with weight `g_k/2`.
fn push_linear(entries: &mut Vec<SymEntry>, g: &[f64]) {
    for (k, &v) in g.iter().enumerate() {
        if v != 0.0 {
            entries.push(SymEntry {
                block: BORDERED_BLOCK,
                i: 0,
                j: 1 + k,
                value: 0.5 * v,
            });
        }
    }
}

/// Copies the lifted program's objective and constraint families from the
/// QCQP data: each affine row `aᵢᵀz = bᵢ` yields itself and its lifted
/// square `⟨aᵢaᵢᵀ, Z⟩ = bᵢ²`; the quadratic constraint becomes
/// `⟨Q̄, Z⟩ + q̄ᵀz + h̄ + s = 0` with slack `s ≥ 0`.
pub fn build_relaxation(f: &FormulationData, inst: &ProblemInstance) -> Result<RelaxationProblem> {
    let d = f.cone.d;
    if d != inst.d() {
        return Err(Error::dim("formulation and instance disagree on d"));
    }
    let m = d * d;
    let p = f.cone.dim();
    let side = f.cone.lifted_side();

    let mut objective = Vec::new();
    push_dense_sym(&mut objective, &f.q_mat, 1);
    push_linear(&mut objective, &f.q_vec);

    let mut constraints = vec![AffineConstraint {
        family: family::BORDER,
        entries: vec![SymEntry {
            block: BORDERED_BLOCK,
            i: 0,
            j: 0,
            value: 1.0,
        }],
        rhs: 1.0,
        kind: ConstraintKind::Equality,
    }];

    let mut first = Vec::new();
    let mut second = Vec::new();
    for row in 0..f.a.rows() {
        let a: Vec<f64> = (0..p).map(|k| f.a[(row, k)]).collect();
        let (fam1, fam2) = if row == 0 {
            (family::TRACE, family::TRACE_SQUARED)
        } else {
            (family::PARTITION, family::PARTITION_SQUARED)
        };
        let mut lin = Vec::new();
        push_linear(&mut lin, &a);
        first.push(AffineConstraint {
            family: fam1,
            entries: lin,
            rhs: f.b[row],
            kind: ConstraintKind::Equality,
        });
        let mut quad = Vec::new();
        push_dense_sym(&mut quad, &DenseMatrix::outer(&a, &a), 1);
        second.push(AffineConstraint {
            family: fam2,
            entries: quad,
            rhs: f.b[row] * f.b[row],
            kind: ConstraintKind::Equality,
        });
    }
    // Keep the family order (i), (ii), (iii)…, (iv)….
    constraints.push(first.remove(0));
    constraints.push(second.remove(0));
    constraints.extend(first);
    constraints.extend(second);

    let mut compl = Vec::new();
    push_dense_sym(&mut compl, &f.qbar_mat, 1);
    push_linear(&mut compl, &f.qbar_vec);
    compl.push(SymEntry {
        block: SLACK_BLOCK,
        i: 0,
        j: 0,
        value: 1.0,
    });
    constraints.push(AffineConstraint {
        family: family::COMPLEMENTARITY,
        entries: compl,
        rhs: -f.hbar,
        kind: ConstraintKind::Inequality,
    });

    for b in 0..3 {
        for c in 0..d {
            for a in 0..d {
                let k = b * m + a + c * d;
                let (i, j) = (a.min(c), a.max(c));
                constraints.push(AffineConstraint {
                    family: family::LINK,
                    entries: vec![
                        SymEntry {
                            block: BORDERED_BLOCK,
                            i: 0,
                            j: 1 + k,
                            value: 0.5,
                        },
                        SymEntry {
                            block: 1 + b,
                            i,
                            j,
                            value: if i == j { -1.0 } else { -0.5 },
                        },
                    ],
                    rhs: 0.0,
                    kind: ConstraintKind::Equality,
                });
            }
        }
    }

    Ok(RelaxationProblem {
        d,
        block_sizes: vec![side, d, d, d, 1],
        objective,
        objective_offset: f.h,
        constraints,
        psd_blocks: vec![0, 1, 2, 3, 4],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub rho: f64,
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub seed: u64,
    /// Over-relaxation factor in `(0, 2)`.
    pub alpha: f64,
    /// Residual balancing: rescale ρ by `rho_factor` when one residual
    /// exceeds the other by `rho_ratio`.
    pub rho_factor: f64,
    pub rho_ratio: f64,
    /// Record `(iteration, max residual)` every this many iterations.
    pub history_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rho: 0.1,
            max_iters: 20_000,
            tol_primal: 1e-7,
            tol_dual: 1e-7,
            seed: 0,
            alpha: 1.0,
            rho_factor: 2.0,
            rho_ratio: 10.0,
            history_every: 100,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !(self.tol_primal > 0.0) || !(self.tol_dual > 0.0) {
            return Err(Error::Config("rho and tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::Config("alpha must lie in (0, 2)".into()));
        }
        if !(self.rho_factor > 1.0) || !(self.rho_ratio > 1.0) {
            return Err(Error::Config(
                "rho_factor and rho_ratio must exceed 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RelaxationResult {
    /// Objective at the affine-feasible iterate minus `safety_margin`.
    pub lower_bound: f64,
    pub objective: f64,
    /// `max(0, ⟨C, x − y⟩)` for the affine iterate `x` and cone iterate `y`,
    /// so the bound is the smaller of the two objectives. Never larger than
    /// `‖C‖_F · primal residual`.
    pub safety_margin: f64,
    #[serde(skip)]
    pub blocks: Vec<DenseMatrix>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub rho: f64,
    pub residual_history: Vec<(usize, f64)>,
}

impl RelaxationResult {
    pub fn bordered(&self) -> &DenseMatrix {
        &self.blocks[BORDERED_BLOCK]
    }
}

/// Layout of the symmetric-vectorized (svec) variable: per block, the
/// upper triangle column by column, off-diagonals scaled by √2 so that
/// `svec(A)·svec(B) = ⟨A, B⟩`.
struct Layout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    len: usize,
}

impl Layout {
    fn new(sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut len = 0;
        for &n in sizes {
            offsets.push(len);
            len += n * (n + 1) / 2;
        }
        Self {
            sizes: sizes.to_vec(),
            offsets,
            len,
        }
    }

    #[inline]
    fn index(&self, block: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.offsets[block] + j * (j + 1) / 2 + i
    }

    fn pack(&self, blocks: &[DenseMatrix]) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for (b, m) in blocks.iter().enumerate() {
            self.pack_block(b, m, &mut out);
        }
        out
    }

    fn pack_block(&self, b: usize, m: &DenseMatrix, out: &mut [f64]) {
        let n = self.sizes[b];
        for j in 0..n {
            for i in 0..=j {
                let v = if i == j {
                    m[(i, j)]
                } else {
                    std::f64::consts::SQRT_2 * m[(i, j)]
                };
                out[self.index(b, i, j)] = v;
            }
        }
    }

    fn unpack_block(&self, b: usize, x: &[f64]) -> DenseMatrix {
        let n = self.sizes[b];
        let mut m = DenseMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = x[self.index(b, i, j)];
                if i == j {
                    m[(i, j)] = v;
                } else {
                    let w = v / std::f64::consts::SQRT_2;
                    m[(i, j)] = w;
                    m[(j, i)] = w;
                }
            }
        }
        m
    }

    fn unpack(&self, x: &[f64]) -> Vec<DenseMatrix> {
        (0..self.sizes.len())
            .map(|b| self.unpack_block(b, x))
            .collect()
    }

    /// Coefficient row with `row · svec(X) = ⟨A, X⟩`.
    fn row(&self, entries: &[SymEntry]) -> Vec<(usize, f64)> {
        entries
            .iter()
            .map(|e| {
                let scale = if e.i == e.j {
                    1.0
                } else {
                    std::f64::consts::SQRT_2
                };
                (self.index(e.block, e.i, e.j), scale * e.value)
            })
            .collect()
    }
}

/// Cholesky factor of the PSD Gram matrix `A Aᵀ`, with linearly dependent
/// rows detected as vanishing pivots and dropped.
struct GramFactor {
    l: DenseMatrix,
    dropped: Vec<bool>,
}

impl GramFactor {
    fn new(gram: &DenseMatrix) -> Self {
        let n = gram.rows();
        let max_diag = gram.diagonal().into_iter().fold(0.0, f64::max);
        let tol = 1e-12 * max_diag.max(1.0);
        let mut l = DenseMatrix::zeros(n, n);
        let mut dropped = vec![false; n];
        for j in 0..n {
            let mut s = gram[(j, j)];
            for k in 0..j {
                s -= l[(j, k)] * l[(j, k)];
            }
            if s <= tol {
                dropped[j] = true;
                continue;
            }
            let piv = s.sqrt();
            l[(j, j)] = piv;
            for i in (j + 1)..n {
                let mut t = gram[(i, j)];
                for k in 0..j {
                    t -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = t / piv;
            }
        }
        Self { l, dropped }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            if self.dropped[i] {
                continue;
            }
            let mut s = rhs[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            if self.dropped[i] {
                y[i] = 0.0;
                continue;
            }
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }
}

struct AffineProjector {
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    factor: GramFactor,
}

impl AffineProjector {
    fn new(rows: Vec<Vec<(usize, f64)>>, rhs: Vec<f64>, len: usize) -> Self {
        let dense: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let mut v = vec![0.0; len];
                for &(k, a) in r {
                    v[k] += a;
                }
                v
            })
            .collect();
        let mc = rows.len();
        let gram = DenseMatrix::from_fn(mc, mc, |i, j| {
            // Sparse-dense product; rows are short.
            rows[i].iter().map(|&(k, a)| a * dense[j][k]).sum()
        });
        Self {
            rows,
            rhs,
            factor: GramFactor::new(&gram),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(k, a)| a * x[k]).sum())
            .collect()
    }

    /// Orthogonal projection of `v` onto `{x : 𝒜x = b}`.
    fn project(&self, v: &mut [f64]) {
        let resid: Vec<f64> = self
            .apply(v)
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| a - b)
            .collect();
        let y = self.factor.solve(&resid);
        for (r, &yi) in self.rows.iter().zip(&y) {
            if yi == 0.0 {
                continue;
            }
            for &(k, a) in r {
                v[k] -= a * yi;
            }
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// ADMM with the splitting `x ∈ affine set`, `y ∈ PSD cones`, `x = y`.
pub fn solve(prob: &RelaxationProblem, opts: &SolveOptions) -> Result<RelaxationResult> {
    opts.validate()?;
    let layout = Layout::new(&prob.block_sizes);
    let n = layout.len;

    let mut c = vec![0.0; n];
    for (k, a) in layout.row(&prob.objective) {
        c[k] += a;
    }
    let rows: Vec<_> = prob
        .constraints
        .iter()
        .map(|cst| layout.row(&cst.entries))
        .collect();
    let rhs: Vec<f64> = prob.constraints.iter().map(|cst| cst.rhs).collect();
    let projector = AffineProjector::new(rows, rhs, n);

    // Deterministic start: a small seeded symmetric perturbation, projected.
    let mut rng = random::seeded(opts.seed);
    let start: Vec<DenseMatrix> = prob
        .block_sizes
        .iter()
        .map(|&s| random::symmetric(&mut rng, s).scale(1e-3))
        .collect();
    let mut bases: Vec<DenseMatrix> = prob
        .block_sizes
        .iter()
        .map(|&s| DenseMatrix::identity(s))
        .collect();
    let mut y = layout.pack(&start);
    project_cones(&layout, &mut y, &mut bases)?;
    let mut u = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut rho = opts.rho;

    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iters {
        iterations += 1;
        for k in 0..n {
            x[k] = y[k] - u[k] - c[k] / rho;
        }
        projector.project(&mut x);

        let y_prev = y.clone();
        let mut v: Vec<f64> = (0..n)
            .map(|k| opts.alpha * x[k] + (1.0 - opts.alpha) * y_prev[k] + u[k])
            .collect();
        project_cones(&layout, &mut v, &mut bases)?;
        y = v;
        for k in 0..n {
            u[k] += opts.alpha * x[k] + (1.0 - opts.alpha) * y_prev[k] - y[k];
        }

        primal = norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
        dual = rho
            * norm(
                &y.iter()
                    .zip(&y_prev)
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            );
        if !primal.is_finite() || !dual.is_finite() {
            return Err(Error::Breakdown(format!(
                "non-finite residual at iteration {iterations}"
            )));
        }
        if opts.history_every > 0 && iterations % opts.history_every == 0 {
            history.push((iterations, primal.max(dual)));
        }
        if primal <= opts.tol_primal && dual <= opts.tol_dual {
            converged = true;
            break;
        }
        if primal > opts.rho_ratio * dual {
            rho *= opts.rho_factor;
            u.iter_mut().for_each(|e| *e /= opts.rho_factor);
        } else if dual > opts.rho_ratio * primal {
            rho /= opts.rho_factor;
            u.iter_mut().for_each(|e| *e *= opts.rho_factor);
        }
    }

    let objective = c.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + prob.objective_offset;
    let safety_margin = c
        .iter()
        .zip(x.iter().zip(&y))
        .map(|(ck, (a, b))| ck * (a - b))
        .sum::<f64>()
        .max(0.0);
    Ok(RelaxationResult {
        lower_bound: objective - safety_margin,
        objective,
        safety_margin,
        blocks: layout.unpack(&x),
        primal_residual: primal,
        dual_residual: dual,
        iterations,
        converged,
        rho,
        residual_history: history,
    })
}

fn project_cones(layout: &Layout, v: &mut [f64], bases: &mut [DenseMatrix]) -> Result<()> {
    for b in 0..layout.sizes.len() {
        if layout.sizes[b] == 1 {
            let k = layout.offsets[b];
            v[k] = v[k].max(0.0);
            continue;
        }
        let m = layout.unpack_block(b, v);
        let eig = match sym_eig_warm(&m, &bases[b]) {
            Ok(e) => e,
            Err(Error::EigNoConvergence { .. }) => sym_eig(&m)?,
            Err(e) => return Err(e),
        };
        let projected = project_from_eig(&eig)?;
        bases[b] = eig.eigenvectors;
        layout.pack_block(b, &projected, v);
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub opt_value: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub atom_objective: f64,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Checks `lower_bound ≤ opt + tol` against the closed-form optimum and
/// that the optimal atom reproduces that optimum through the lifted
/// objective.
pub fn certify_sandwich(
    inst: &ProblemInstance,
    result: &RelaxationResult,
    tol: f64,
) -> Result<SandwichReport> {
    let oracle = oracle_opt(inst)?;
    let atom = crate::verify::optimal_atom(inst, &oracle)?;
    let atom_objective = crate::cp_lift::eval_objective_vectorized(&atom, inst)?;
    if (atom_objective - oracle.opt_value).abs() > tol {
        return Err(Error::Breakdown(format!(
            "optimal atom objective {atom_objective:.12e} differs from optimum {:.12e}",
            oracle.opt_value
        )));
    }
    if result.lower_bound > oracle.opt_value + tol {
        return Err(Error::SandwichViolation {
            lower_bound: result.lower_bound,
            opt_value: oracle.opt_value,
            tol,
        });
    }
    Ok(SandwichReport {
        opt_value: oracle.opt_value,
        lower_bound: result.lower_bound,
        gap: oracle.opt_value - result.lower_bound,
        atom_objective,
        converged: result.converged,
        primal_residual: result.primal_residual,
        dual_residual: result.dual_residual,
    })
}
