//! Deep linear network training and its shallow factorized equivalent.
//!
//! The training loss is `(1/2n) ‖W_N ⋯ W_1 X − Y‖_F²`. Since the composed map
//! has rank at most `r = min_k d_k` and every rank-`r` matrix factors as
//! `U Vᵀ`, the deep problem has the same optimal value as the shallow one
//! over `U ∈ R^{d_N×r}`, `V ∈ R^{d_0×r}`. [`oracle_opt`] solves the shallow
//! problem in closed form (reduced-rank regression) and anchors every
//! equivalence check in the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random::{self, Rng};
use crate::tensor::{sym_eig, thin_svd, DenseMatrix, DEFAULT_RANK_TOL};

/// Singular values of `X` below this fraction of `σ_max` are treated as zero.
pub const PINV_CUTOFF: f64 = 1e-10;
/// Relative noise floor of eigenvalues computed from a Gram matrix.
const GRAM_NOISE_FLOOR: f64 = 64.0 * f64::EPSILON;

/// Training data together with the layer widths `d_0, …, d_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    x: DenseMatrix,
    y: DenseMatrix,
    widths: Vec<usize>,
}

impl ProblemInstance {
    pub fn new(x: DenseMatrix, y: DenseMatrix, widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::WidthIncompatible(format!(
                "need at least one layer (two widths), got {}",
                widths.len()
            )));
        }
        if let Some(k) = widths.iter().position(|&w| w == 0) {
            return Err(Error::WidthIncompatible(format!("width d_{k} is zero")));
        }
        let d_in = widths[0];
        let d_out = *widths.last().unwrap();
        if x.cols() == 0 {
            return Err(Error::dim("need at least one sample (n >= 1)"));
        }
        if x.rows() != d_in {
            return Err(Error::dim(format!(
                "X must be {d_in}x{} (d_0 x n), got {}x{}",
                x.cols(),
                x.rows(),
                x.cols()
            )));
        }
        if y.shape() != (d_out, x.cols()) {
            return Err(Error::dim(format!(
                "Y must be {d_out}x{} (d_N x n), got {}x{}",
                x.cols(),
                y.rows(),
                y.cols()
            )));
        }
        Ok(Self { x, y, widths })
    }

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn y(&self) -> &DenseMatrix {
        &self.y
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Number of layers `N`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn n(&self) -> usize {
        self.x.cols()
    }

    /// `d_0`
    pub fn d_in(&self) -> usize {
        self.widths[0]
    }

    /// `d_N`
    pub fn d_out(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// `d = d_N + d_0`, the side of the block lift.
    pub fn d(&self) -> usize {
        self.d_in() + self.d_out()
    }

    /// Bottleneck width `r = min_k d_k`, taken over all widths including
    /// the input and output layers.
    pub fn r(&self) -> usize {
        *self.widths.iter().min().unwrap()
    }

    /// True when `r >= min(d_0, d_N)`, i.e. the rank bound never binds.
    pub fn rank_constraint_vacuous(&self) -> bool {
        self.r() >= self.d_in().min(self.d_out())
    }

    /// `(1/2n) ‖P X − Y‖_F²` for a map `P` of shape `d_N×d_0`.
    pub fn loss_of_map(&self, p: &DenseMatrix) -> Result<f64> {
        if p.shape() != (self.d_out(), self.d_in()) {
            return Err(Error::dim(format!(
                "linear map must be {}x{}, got {}x{}",
                self.d_out(),
                self.d_in(),
                p.rows(),
                p.cols()
            )));
        }
        let resid = p.matmul(&self.x)?.sub(&self.y)?;
        let fro = resid.frobenius_norm();
        Ok(fro * fro / (2.0 * self.n() as f64))
    }
}

/// Deep parameters `(W_1, …, W_N)` with `W_k` of shape `d_k×d_{k−1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerStack {
    layers: Vec<DenseMatrix>,
}

impl LayerStack {
    pub fn new(layers: Vec<DenseMatrix>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::dim("layer stack is empty"));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[1].cols() != pair[0].rows() {
                return Err(Error::dim(format!(
                    "layer {} is {}x{} but layer {} outputs {} rows",
                    k + 2,
                    pair[1].rows(),
                    pair[1].cols(),
                    k + 1,
                    pair[0].rows()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseMatrix] {
        &self.layers
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].cols())
            .chain(self.layers.iter().map(DenseMatrix::rows))
            .collect()
    }

    /// Random Gaussian stack with the given widths.
    pub fn random(rng: &mut Rng, widths: &[usize]) -> Result<Self> {
        let layers = widths
            .windows(2)
            .map(|w| random::gaussian(rng, w[1], w[0]))
            .collect();
        Self::new(layers)
    }
}

/// Product `W_N ⋯ W_1`.
pub fn collapse(stack: &LayerStack) -> DenseMatrix {
    let mut it = stack.layers.iter();
    let first = it.next().expect("non-empty by construction").clone();
    it.fold(first, |acc, w| w.mul_unchecked(&acc))
}

pub fn deep_objective(stack: &LayerStack, inst: &ProblemInstance) -> Result<f64> {
    if stack.widths() != inst.widths() {
        return Err(Error::dim(format!(
            "stack widths {:?} do not match instance widths {:?}",
            stack.widths(),
            inst.widths()
        )));
    }
    inst.loss_of_map(&collapse(stack))
}

/// Shallow factorization `(U, V)` representing the map `U Vᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorPoint {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
}

impl FactorPoint {
    pub fn new(u: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        if u.cols() != v.cols() {
            return Err(Error::dim(format!(
                "U has {} columns but V has {}",
                u.cols(),
                v.cols()
            )));
        }
        Ok(Self { u, v })
    }

    pub fn zeros(d_out: usize, d_in: usize, r: usize) -> Self {
        Self {
            u: DenseMatrix::zeros(d_out, r),
            v: DenseMatrix::zeros(d_in, r),
        }
    }

    pub fn random(rng: &mut Rng, d_out: usize, d_in: usize, r: usize) -> Self {
        let u = random::gaussian(rng, d_out, r);
        let v = random::gaussian(rng, d_in, r);
        Self { u, v }
    }

    pub fn random_for(rng: &mut Rng, inst: &ProblemInstance) -> Self {
        Self::random(rng, inst.d_out(), inst.d_in(), inst.r())
    }

    pub fn rank_bound(&self) -> usize {
        self.u.cols()
    }

    /// `U Vᵀ`
    pub fn product(&self) -> DenseMatrix {
        self.u.mul_unchecked(&self.v.transpose())
    }

    fn check_against(&self, inst: &ProblemInstance) -> Result<()> {
        if self.u.rows() != inst.d_out() || self.v.rows() != inst.d_in() {
            return Err(Error::dim(format!(
                "factor shapes U {}x{}, V {}x{} do not match d_N = {}, d_0 = {}",
                self.u.rows(),
                self.u.cols(),
                self.v.rows(),
                self.v.cols(),
                inst.d_out(),
                inst.d_in()
            )));
        }
        Ok(())
    }
}

pub fn shallow_objective(p: &FactorPoint, inst: &ProblemInstance) -> Result<f64> {
    p.check_against(inst)?;
    inst.loss_of_map(&p.product())
}

/// `J_{m,r}`: the `m×r` matrix with `I_r` on top (requires `m >= r`).
fn top_identity(m: usize, r: usize) -> DenseMatrix {
    DenseMatrix::from_fn(m, r, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// Layers whose product is `U Vᵀ`: `V` enters in the first layer, `U` in the
/// last, and every intermediate layer routes the `r` bottleneck coordinates
/// through identity padding.
pub fn expand_to_layers(p: &FactorPoint, widths: &[usize]) -> Result<LayerStack> {
    if widths.len() < 2 {
        return Err(Error::WidthIncompatible("need at least two widths".into()));
    }
    let r = p.rank_bound();
    let min_width = *widths.iter().min().unwrap();
    if min_width != r {
        return Err(Error::WidthIncompatible(format!(
            "factor rank bound {r} differs from bottleneck width {min_width}"
        )));
    }
    let (d_in, d_out) = (widths[0], *widths.last().unwrap());
    if p.v.rows() != d_in || p.u.rows() != d_out {
        return Err(Error::WidthIncompatible(format!(
            "factors map R^{} -> R^{} but widths map R^{d_in} -> R^{d_out}",
            p.v.rows(),
            p.u.rows()
        )));
    }
    let n_layers = widths.len() - 1;
    if n_layers == 1 {
        return LayerStack::new(vec![p.product()]);
    }
    let mut layers = Vec::with_capacity(n_layers);
    for k in 1..=n_layers {
        let layer = if k == 1 {
            top_identity(widths[1], r).mul_unchecked(&p.v.transpose())
        } else if k == n_layers {
            p.u.mul_unchecked(&top_identity(widths[k - 1], r).transpose())
        } else {
            top_identity(widths[k], r).mul_unchecked(&top_identity(widths[k - 1], r).transpose())
        };
        layers.push(layer);
    }
    LayerStack::new(layers)
}

/// Gradient of [`shallow_objective`]: with `R = U Vᵀ X − Y`,
/// `∂U = (1/n) R Xᵀ V` and `∂V = (1/n) X Rᵀ U`.
pub fn shallow_gradient(
    p: &FactorPoint,
    inst: &ProblemInstance,
) -> Result<(DenseMatrix, DenseMatrix)> {
    p.check_against(inst)?;
    let inv_n = 1.0 / inst.n() as f64;
    let resid = p.product().mul_unchecked(inst.x()).sub(inst.y())?;
    let rx = resid.mul_unchecked(&inst.x().transpose());
    let du = rx.mul_unchecked(&p.v).scale(inv_n);
    let dv = rx.tr_mul(&p.u).scale(inv_n);
    Ok((du, dv))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub max_iters: usize,
    /// Initial (or fixed, without line search) step size.
    pub step: f64,
    pub line_search: bool,
    /// Stop once the gradient's Frobenius norm falls below this.
    pub tol: f64,
    pub seed: u64,
    /// Frobenius norm given to both `U` and `V` at initialization.
    pub init_scale: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            step: 0.1,
            line_search: true,
            tol: 1e-10,
            seed: 0,
            init_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub point: FactorPoint,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// No step along the negative gradient decreased the objective at
    /// working precision.
    pub stalled: bool,
}

/// Gradient descent on the shallow objective from a balanced random start.
pub fn train_shallow(inst: &ProblemInstance, opts: &TrainOptions) -> Result<TrainOutcome> {
    let mut rng = random::seeded(opts.seed);
    let mut p = FactorPoint::random_for(&mut rng, inst);
    for m in [&mut p.u, &mut p.v] {
        let norm = m.frobenius_norm();
        if norm > 0.0 {
            *m = m.scale(opts.init_scale / norm);
        }
    }

    let initial = shallow_objective(&p, inst)?;
    let limit = 1e6 * initial.max(f64::MIN_POSITIVE);
    let mut f = initial;
    let mut step = opts.step;
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    let mut stalled = false;

    while iterations < opts.max_iters {
        let (du, dv) = shallow_gradient(&p, inst)?;
        let g2 = du.inner(&du)? + dv.inner(&dv)?;
        grad_norm = g2.sqrt();
        if grad_norm <= opts.tol {
            break;
        }
        iterations += 1;

        let mut trial_step = step;
        let (next, f_next) = loop {
            let cand = FactorPoint {
                u: p.u.zip_with(&du, |a, g| a - trial_step * g),
                v: p.v.zip_with(&dv, |a, g| a - trial_step * g),
            };
            let fc = shallow_objective(&cand, inst)?;
            if !opts.line_search || fc <= f - 0.5 * trial_step * g2 {
                break (cand, fc);
            }
            trial_step *= 0.5;
            if trial_step < 1e-30 {
                // No decrease available at machine precision.
                break (p.clone(), f);
            }
        };
        if !f_next.is_finite() || f_next > limit {
            return Err(Error::Divergence {
                objective: f_next,
                limit,
            });
        }
        stalled = next == p;
        p = next;
        f = f_next;
        if stalled {
            break;
        }
        if opts.line_search {
            step = trial_step * 2.0;
        }
    }

    Ok(TrainOutcome {
        point: p,
        objective: f,
        grad_norm,
        iterations,
        converged: grad_norm <= opts.tol,
        stalled,
    })
}

/// Global optimum of the shallow problem.
#[derive(Clone, Debug)]
pub struct OracleResult {
    pub w_star: DenseMatrix,
    pub opt_value: f64,
    pub effective_rank: usize,
}

impl OracleResult {
    /// Factors `W*` as `U Vᵀ` with `r` columns (zero-padded).
    pub fn factor_point(&self, r: usize) -> Result<FactorPoint> {
        factor_rank_r(&self.w_star, r)
    }
}

/// Reduced-rank regression: least-squares fit through the pseudoinverse of
/// `X`, then the best rank-`r` truncation of the fitted values `Ŷ`. Because
/// `WX` always lies in the row space of `X`, the loss splits as
/// `‖WX − Ŷ‖² + ‖Ŷ − Y‖²` and Eckart–Young applies to the first term.
pub fn oracle_opt(inst: &ProblemInstance) -> Result<OracleResult> {
    let x = inst.x();
    let y = inst.y();
    let r = inst.r();

    let gram = x.mul_unchecked(&x.transpose());
    let eig = sym_eig(&gram)?;
    let top = eig.max_eigenvalue();
    let cut = top * (PINV_CUTOFF * PINV_CUTOFF).max(GRAM_NOISE_FLOOR);
    // X⁺ restricted to the retained spectrum: Xᵀ U Λ⁻¹ Uᵀ.
    let gram_pinv = eig.reconstruct_with(|lam| {
        if lam > cut && lam > 0.0 {
            1.0 / lam
        } else {
            0.0
        }
    });
    let w_ls = y.mul_unchecked(&x.transpose()).mul_unchecked(&gram_pinv);

    let w_star = if r >= inst.d_out().min(inst.d_in()) {
        w_ls
    } else {
        let fitted = w_ls.mul_unchecked(x);
        let left = sym_eig(&fitted.mul_unchecked(&fitted.transpose()))?;
        let basis = left.eigenvectors.submatrix(0, 0, inst.d_out(), r)?;
        let proj = basis.mul_unchecked(&basis.transpose());
        proj.mul_unchecked(&w_ls)
    };

    let opt_value = inst.loss_of_map(&w_star)?;
    let effective_rank = map_rank(&w_star)?;
    Ok(OracleResult {
        w_star,
        opt_value,
        effective_rank,
    })
}

fn map_rank(m: &DenseMatrix) -> Result<usize> {
    let sv = thin_svd(m)?.singular_values;
    let top = sv.first().copied().unwrap_or(0.0);
    let cut = DEFAULT_RANK_TOL * top.max(1.0);
    Ok(sv.iter().filter(|&&s| s > cut).count())
}

/// Balanced factorization `M = U Vᵀ` with `U = U_M Σ^{1/2}`, `V = V_M Σ^{1/2}`,
/// keeping `r` columns.
pub fn factor_rank_r(m: &DenseMatrix, r: usize) -> Result<FactorPoint> {
    let svd = thin_svd(m)?;
    let k = svd.singular_values.len().min(r);
    let mut u = DenseMatrix::zeros(m.rows(), r);
    let mut v = DenseMatrix::zeros(m.cols(), r);
    for j in 0..k {
        let s = svd.singular_values[j].sqrt();
        for (o, &x) in u.col_mut(j).iter_mut().zip(svd.u.col(j)) {
            *o = s * x;
        }
        for (o, &x) in v.col_mut(j).iter_mut().zip(svd.v.col(j)) {
            *o = s * x;
        }
    }
    FactorPoint::new(u, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, widths: Vec<usize>) -> ProblemInstance {
        ProblemInstance::new(
            DenseMatrix::from_rows(&x).unwrap(),
            DenseMatrix::from_rows(&y).unwrap(),
            widths,
        )
        .unwrap()
    }

    #[test]
    fn instance_validation() {
        let x = DenseMatrix::zeros(3, 4);
        let y = DenseMatrix::zeros(2, 4);
        assert!(ProblemInstance::new(x.clone(), y.clone(), vec![2, 1, 2]).is_err());
        assert!(ProblemInstance::new(x.clone(), y.clone(), vec![3, 0, 2]).is_err());
        assert!(ProblemInstance::new(x.clone(), y.clone(), vec![3]).is_err());
        let ok = ProblemInstance::new(x, y, vec![3, 1, 2]).unwrap();
        assert_eq!((ok.d(), ok.r(), ok.depth(), ok.n()), (5, 1, 2, 4));
        assert!(!ok.rank_constraint_vacuous());
    }

    #[test]
    fn zero_layers_and_targets() {
        let i = inst(vec![vec![1.0, 2.0]], vec![vec![0.0, 0.0]], vec![1, 1]);
        let stack = LayerStack::new(vec![DenseMatrix::zeros(1, 1)]).unwrap();
        assert_eq!(deep_objective(&stack, &i).unwrap(), 0.0);
    }

    #[test]
    fn single_zero_layer_gives_target_energy() {
        let i = inst(vec![vec![1.0, 2.0]], vec![vec![3.0, 4.0]], vec![1, 1]);
        let stack = LayerStack::new(vec![DenseMatrix::zeros(1, 1)]).unwrap();
        assert_eq!(deep_objective(&stack, &i).unwrap(), 25.0 / 4.0);
        let p = FactorPoint::zeros(1, 1, 1);
        assert_eq!(shallow_objective(&p, &i).unwrap(), 25.0 / 4.0);
    }

    #[test]
    fn collapse_of_rank_one_pair() {
        let u = DenseMatrix::column(&[1.0, 2.0]);
        let vt = DenseMatrix::from_rows(&[vec![3.0, -1.0, 0.5]]).unwrap();
        let stack = LayerStack::new(vec![vt.clone(), u.clone()]).unwrap();
        assert_eq!(collapse(&stack), u.matmul(&vt).unwrap());
        assert_eq!(stack.widths(), vec![3, 1, 2]);
    }

    #[test]
    fn mismatched_stack_rejected() {
        assert!(LayerStack::new(vec![DenseMatrix::zeros(2, 3), DenseMatrix::zeros(2, 3)]).is_err());
    }

    #[test]
    fn expansion_shapes() {
        let p = FactorPoint::new(
            DenseMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap(),
            DenseMatrix::from_rows(&[vec![3.0], vec![4.0], vec![5.0]]).unwrap(),
        )
        .unwrap();
        let one = expand_to_layers(&p, &[3, 1, 2]).unwrap();
        assert_eq!(one.layers()[0], p.v.transpose());
        assert_eq!(one.layers()[1], p.u);
        let n1 = expand_to_layers(&p, &[3, 2]);
        assert!(n1.is_err(), "bottleneck of [3, 2] is 2, not 1");
        assert!(expand_to_layers(&p, &[3, 4, 1, 2]).is_ok());
        assert!(expand_to_layers(&p, &[2, 1, 2]).is_err());
    }

    #[test]
    fn diagonal_target_truncation() {
        // X = I, Y = diag(3, 2, 1), r = 1: keep the leading direction.
        let id = (0..3)
            .map(|i| (0..3).map(|j| f64::from(u8::from(i == j))).collect())
            .collect();
        let y = vec![
            vec![3.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let i = inst(id, y, vec![3, 1, 3]);
        let o = oracle_opt(&i).unwrap();
        assert!((o.opt_value - 5.0 / 6.0).abs() < 1e-14);
        assert_eq!(o.effective_rank, 1);
        assert!((o.w_star[(0, 0)] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn oracle_handles_rank_deficient_x() {
        // Two identical input rows: X has rank one.
        let i = inst(
            vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]],
            vec![vec![2.0, 4.0, 6.0]],
            vec![2, 1],
        );
        let o = oracle_opt(&i).unwrap();
        assert!(o.opt_value < 1e-20);
    }

    #[test]
    fn zero_target_training() {
        let i = inst(
            vec![vec![1.0, 0.5, -1.0], vec![0.2, 1.0, 0.3]],
            vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]],
            vec![2, 1, 2],
        );
        let out = train_shallow(&i, &TrainOptions::default()).unwrap();
        assert!(out.objective < 1e-12, "objective {}", out.objective);
    }

    #[test]
    fn divergence_detected_with_huge_fixed_step() {
        let i = inst(vec![vec![10.0, -3.0]], vec![vec![1.0, 2.0]], vec![1, 1]);
        let opts = TrainOptions {
            step: 1e3,
            line_search: false,
            max_iters: 100,
            ..TrainOptions::default()
        };
        assert!(matches!(
            train_shallow(&i, &opts),
            Err(Error::Divergence { .. })
        ));
    }
}
