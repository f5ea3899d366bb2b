mod common;

use cplift::cp_lift::{
    assemble_qcqp, atom_from_triple, check_constraints_vectorized, mix_atoms,
    sample_feasible_triple,
};
use cplift::io::GeneratorKind;
use cplift::linnet::{oracle_opt, ProblemInstance};
use cplift::relax::{build_relaxation, certify_sandwich, family, solve, SolveOptions, SLACK_BLOCK};
use cplift::tensor::sym_eig;
use cplift::{random, DenseMatrix, Error};

fn zero_target(widths: &[usize], n: usize, seed: u64) -> ProblemInstance {
    let x = random::gaussian(&mut random::seeded(seed), widths[0], n);
    let y = DenseMatrix::zeros(*widths.last().unwrap(), n);
    ProblemInstance::new(x, y, widths.to_vec()).unwrap()
}

#[test]
fn zero_target_bound_is_zero() {
    for (k, widths) in [&[1usize, 1][..], &[2, 1, 2], &[2, 2, 1, 2]]
        .iter()
        .enumerate()
    {
        let inst = zero_target(widths, 4, k as u64);
        let prob = build_relaxation(&assemble_qcqp(&inst), &inst).unwrap();
        let res = solve(&prob, &SolveOptions::default()).unwrap();
        assert!(res.converged);
        assert!(
            res.lower_bound.abs() <= 1e-7,
            "{widths:?}: {}",
            res.lower_bound
        );
        let s = certify_sandwich(&inst, &res, 1e-6).unwrap();
        assert!(s.gap <= 1e-6);
    }
}

#[test]
fn exact_fit_bound_is_at_most_zero() {
    for (k, widths) in common::SMALL_WIDTHS.iter().enumerate() {
        let inst = common::instance(GeneratorKind::ExactFit, widths, 5, 40 + k as u64);
        let prob = build_relaxation(&assemble_qcqp(&inst), &inst).unwrap();
        let res = solve(&prob, &SolveOptions::default()).unwrap();
        assert!(res.converged);
        assert!(res.lower_bound <= 1e-6, "{widths:?}: {}", res.lower_bound);
    }
}

#[test]
fn constraint_counts_follow_the_families() {
    let inst = common::gaussian_instance(&[2, 1, 2], 3, 1);
    let prob = build_relaxation(&assemble_qcqp(&inst), &inst).unwrap();
    let d = inst.d();
    assert_eq!(prob.block_sizes, vec![1 + 3 * d * d, d, d, d, 1]);
    assert_eq!(prob.count(family::TRACE), 1);
    assert_eq!(prob.count(family::TRACE_SQUARED), 1);
    assert_eq!(prob.count(family::PARTITION), d * d);
    assert_eq!(prob.count(family::PARTITION_SQUARED), d * d);
    assert_eq!(prob.count(family::COMPLEMENTARITY), 1);
    assert_eq!(prob.count(family::LINK), 3 * d * d);
}

/// Every feasible atom, and every mixture of atoms, satisfies the
/// relaxation's affine rows and cone conditions.
#[test]
fn atoms_and_mixtures_are_relaxation_feasible() {
    let mut rng = random::seeded(3);
    for (k, widths) in common::WIDTHS.iter().enumerate() {
        let inst = common::gaussian_instance(widths, 3, 50 + k as u64);
        let prob = build_relaxation(&assemble_qcqp(&inst), &inst).unwrap();
        let mut atoms = Vec::new();
        for _ in 0..10 {
            let atom =
                atom_from_triple(&sample_feasible_triple(&mut rng, inst.d(), inst.r()).unwrap());
            assert!(check_constraints_vectorized(&atom, &inst, 1e-8).passed());
            let blocks = prob.embed(&atom.bordered()).unwrap();
            assert!(prob.affine_violation(&blocks) <= 1e-8);
            assert!(blocks[SLACK_BLOCK][(0, 0)] >= -1e-8);
            for b in &blocks[1..SLACK_BLOCK] {
                assert!(sym_eig(b).unwrap().min_eigenvalue() >= -1e-8);
            }
            atoms.push(atom);
        }
        let mixed = mix_atoms(&atoms, &[0.1; 10]).unwrap();
        let blocks = prob.embed(&mixed.bordered()).unwrap();
        assert!(prob.affine_violation(&blocks) <= 1e-8);
        assert!(sym_eig(&blocks[0]).unwrap().min_eigenvalue() >= -1e-8);
    }
}

#[test]
fn optimal_atom_objective_matches_relaxation_objective() {
    let inst = common::gaussian_instance(&[2, 1, 2], 4, 9);
    let prob = build_relaxation(&assemble_qcqp(&inst), &inst).unwrap();
    let oracle = oracle_opt(&inst).unwrap();
    let atom = cplift::verify::optimal_atom(&inst, &oracle).unwrap();
    let value = prob.objective_value(&prob.embed(&atom.bordered()).unwrap());
    assert!((value - oracle.opt_value).abs() <= 1e-10);
}

#[test]
fn solves_are_deterministic() {
    let inst = common::gaussian_instance(&[2, 1, 2], 4, 12);
    let prob = build_relaxation(&assemble_qcqp(&inst), &inst).unwrap();
    let a = solve(&prob, &SolveOptions::default()).unwrap();
    let b = solve(&prob, &SolveOptions::default()).unwrap();
    assert_eq!(a.lower_bound.to_bits(), b.lower_bound.to_bits());
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.blocks, b.blocks);
    assert_eq!(a.residual_history, b.residual_history);
}

/// Regression property on seeded runs: the residual at iteration `10k` is
/// no larger than at iteration `k`, for `k` past a short burn-in.
#[test]
fn residuals_trend_down() {
    let opts = SolveOptions {
        history_every: 10,
        ..SolveOptions::default()
    };
    for (k, widths) in common::SMALL_WIDTHS.iter().enumerate() {
        let inst = common::gaussian_instance(widths, 4, 60 + k as u64);
        let prob = build_relaxation(&assemble_qcqp(&inst), &inst).unwrap();
        let res = solve(&prob, &opts).unwrap();
        assert!(res.converged);
        let at = |it: usize| {
            res.residual_history
                .iter()
                .find(|(i, _)| *i == it)
                .map(|(_, v)| *v)
        };
        for &(it, v) in res.residual_history.iter().filter(|(i, _)| *i >= 30) {
            if let Some(later) = at(10 * it) {
                assert!(
                    later <= v,
                    "{widths:?}: residual {later:.3e} at {} exceeds {v:.3e} at {it}",
                    10 * it
                );
            }
        }
    }
}

#[test]
fn iteration_cap_and_sandwich_error() {
    let inst = common::gaussian_instance(&[2, 1, 2], 4, 13);
    let prob = build_relaxation(&assemble_qcqp(&inst), &inst).unwrap();
    let res = solve(
        &prob,
        &SolveOptions {
            max_iters: 10,
            ..SolveOptions::default()
        },
    )
    .unwrap();
    assert!(!res.converged);
    assert!(res.primal_residual.is_finite() && res.dual_residual.is_finite());

    // A fabricated bound above the optimum must be reported as a violation.
    let mut fake = solve(&prob, &SolveOptions::default()).unwrap();
    fake.lower_bound = oracle_opt(&inst).unwrap().opt_value + 1.0;
    assert!(matches!(
        certify_sandwich(&inst, &fake, 1e-6),
        Err(Error::SandwichViolation { .. })
    ));
}
