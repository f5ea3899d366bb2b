//! Helpers shared by the integration tests, including reference
//! computations that do not go through the closed-form optimum.
#![allow(dead_code)]

use cplift::io::{generate_instance, GeneratorKind, GeneratorSpec};
use cplift::linnet::{shallow_objective, FactorPoint, ProblemInstance};
use cplift::random::{self, Rng};
use cplift::rank_sdp::ComplementarityTriple;
use cplift::DenseMatrix;
use rand::Rng as _;

/// Width chains at desk scale: `d_0, d_N <= 4`, depth up to 4, mixing
/// bottleneck and vacuous rank cases.
pub const WIDTHS: [&[usize]; 10] = [
    &[1, 1],
    &[2, 1, 2],
    &[3, 2, 2],
    &[2, 2, 1, 3],
    &[4, 2, 4],
    &[3, 3, 1, 2, 4],
    &[2, 3, 2],
    &[4, 1, 1],
    &[1, 2, 3, 4],
    &[3, 2, 2, 3],
];

/// Chains with `d = d_0 + d_N <= 4`, small enough for quick relaxations.
pub const SMALL_WIDTHS: [&[usize]; 6] = [
    &[1, 1],
    &[2, 1, 2],
    &[2, 1, 1],
    &[1, 2, 1],
    &[2, 2, 1, 2],
    &[2, 2, 2],
];

pub fn instance(kind: GeneratorKind, widths: &[usize], n: usize, seed: u64) -> ProblemInstance {
    generate_instance(&GeneratorSpec::new(kind, widths.to_vec(), n), seed)
        .expect("valid generator spec")
}

pub fn gaussian_instance(widths: &[usize], n: usize, seed: u64) -> ProblemInstance {
    instance(GeneratorKind::RandomGaussian, widths, n, seed)
}

pub fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.sub(b).expect("same shape").max_abs()
}

/// Gauss-Jordan inverse with partial pivoting; `None` when a pivot is
/// tiny relative to the matrix scale.
pub fn invert(a: &DenseMatrix) -> Option<DenseMatrix> {
    let n = a.rows();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| a[(i, j)]).collect();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))?;
        if m[p][c].abs() <= 1e-13 * scale {
            return None;
        }
        m.swap(c, p);
        let piv = m[c][c];
        m[c].iter_mut().for_each(|v| *v /= piv);
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for k in 0..2 * n {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
    }
    Some(DenseMatrix::from_fn(n, n, |i, j| m[i][n + j]))
}

/// Alternating least squares on `(1/2n)‖U Vᵀ X − Y‖²` from one random start.
/// Each half-step is an exact least-squares solve; it never touches the
/// reduced-rank closed form.
pub fn alternating_minimization(
    inst: &ProblemInstance,
    seed: u64,
    max_iters: usize,
) -> (FactorPoint, f64) {
    let mut rng = random::seeded(seed);
    let mut p = FactorPoint::random_for(&mut rng, inst);
    let x = inst.x();
    let y = inst.y();
    let xxt_inv = invert(&x.matmul(&x.transpose()).unwrap());
    let mut prev = shallow_objective(&p, inst).unwrap();
    for _ in 0..max_iters {
        // U-step: U = Y Xᵀ V (Vᵀ X Xᵀ V)⁻¹
        let xv = x.transpose().matmul(&p.v).unwrap();
        if let Some(g) = invert(&xv.transpose().matmul(&xv).unwrap()) {
            p.u = y.matmul(&xv).unwrap().matmul(&g).unwrap();
        }
        // V-step: Vᵀ = (UᵀU)⁻¹ Uᵀ Y Xᵀ (X Xᵀ)⁻¹
        if let (Some(g), Some(h)) = (invert(&p.u.transpose().matmul(&p.u).unwrap()), &xxt_inv) {
            let vt = g
                .matmul(&p.u.transpose())
                .unwrap()
                .matmul(y)
                .unwrap()
                .matmul(&x.transpose())
                .unwrap()
                .matmul(h)
                .unwrap();
            p.v = vt.transpose();
        }
        let obj = shallow_objective(&p, inst).unwrap();
        if prev - obj <= 1e-16 * prev.max(1e-300) {
            prev = obj.min(prev);
            break;
        }
        prev = obj;
    }
    (p, prev)
}

/// Best objective over `starts` alternating-minimization runs.
pub fn multistart_minimum(inst: &ProblemInstance, starts: u64, max_iters: usize) -> f64 {
    (0..starts)
        .map(|s| alternating_minimization(inst, 1000 + s, max_iters).1)
        .fold(f64::INFINITY, f64::min)
}

/// Central differences of the shallow objective in every entry of `U` and `V`.
pub fn finite_difference_gradient(
    p: &FactorPoint,
    inst: &ProblemInstance,
    h: f64,
) -> (DenseMatrix, DenseMatrix) {
    let f = |q: &FactorPoint| shallow_objective(q, inst).unwrap();
    let mut du = DenseMatrix::zeros(p.u.rows(), p.u.cols());
    for j in 0..p.u.cols() {
        for i in 0..p.u.rows() {
            let mut a = p.clone();
            let mut b = p.clone();
            a.u[(i, j)] += h;
            b.u[(i, j)] -= h;
            du[(i, j)] = (f(&a) - f(&b)) / (2.0 * h);
        }
    }
    let mut dv = DenseMatrix::zeros(p.v.rows(), p.v.cols());
    for j in 0..p.v.cols() {
        for i in 0..p.v.rows() {
            let mut a = p.clone();
            let mut b = p.clone();
            a.v[(i, j)] += h;
            b.v[(i, j)] -= h;
            dv[(i, j)] = (f(&a) - f(&b)) / (2.0 * h);
        }
    }
    (du, dv)
}

/// Random triple satisfying the complementarity system without going
/// through the projector construction: `W′ = Q diag(λ) Qᵀ` with `k <= r`
/// unit eigenvalues and fractional ones summing to `r − k`, `S = I − W′`,
/// and `W` a random PSD matrix supported on the unit eigenspace.
pub fn converse_triple(rng: &mut Rng, d: usize, r: usize) -> ComplementarityTriple {
    assert!(r <= d);
    let k = if r == d { d } else { rng.gen_range(0..=r) };
    let mut lambda = vec![1.0; k];
    let rest = d - k;
    if rest > 0 {
        let target = (r - k) as f64;
        // Rescaled uniforms, resampled until every value lies in [0, 1).
        loop {
            let w: Vec<f64> = (0..rest).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let s: f64 = w.iter().sum();
            let cand: Vec<f64> = w.iter().map(|x| x * target / s).collect();
            if cand.iter().all(|&x| x < 1.0 - 1e-6) {
                lambda.extend(cand);
                break;
            }
        }
    }
    let q = random::orthogonal(rng, d);
    let w_prime = q
        .matmul(&DenseMatrix::from_diag(&lambda))
        .unwrap()
        .matmul(&q.transpose())
        .unwrap()
        .symmetrized()
        .unwrap();
    let s = DenseMatrix::identity(d).sub(&w_prime).unwrap();
    let w = if k == 0 {
        DenseMatrix::zeros(d, d)
    } else {
        let qk = q.submatrix(0, 0, d, k).unwrap();
        let g = random::gaussian(rng, k, k);
        let inner = g.matmul(&g.transpose()).unwrap();
        qk.matmul(&inner)
            .unwrap()
            .matmul(&qk.transpose())
            .unwrap()
            .symmetrized()
            .unwrap()
    };
    ComplementarityTriple::new(w, w_prime, s).unwrap()
}
