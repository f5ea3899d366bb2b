mod common;

use cplift::cp_lift::{
    assemble_qcqp, atom_from_triple, check_constraints_kronecker, check_constraints_vectorized,
    eval_objective_kronecker, eval_objective_vectorized, kron_blocks, kron_consistency, mix_atoms,
    names, objective_kernel, sample_feasible_triple, LiftedPoint,
};
use cplift::linnet::{oracle_opt, FactorPoint};
use cplift::rank_sdp::{check_complementarity, lift_to_block, projector_witness};
use cplift::report::{Membership, RowKind};
use cplift::tensor::{numerical_rank, sym_eig, DEFAULT_RANK_TOL};
use cplift::verify::optimal_atom;
use cplift::{random, Error};
use proptest::prelude::*;

fn feasible_atoms(seed: u64, d: usize, r: usize, count: usize) -> Vec<LiftedPoint> {
    let mut rng = random::seeded(seed);
    (0..count)
        .map(|_| atom_from_triple(&sample_feasible_triple(&mut rng, d, r).unwrap()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mixture_residuals_are_linear(k in 0usize..10, seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let inst = common::gaussian_instance(common::WIDTHS[k], 3, seed);
        let atoms = feasible_atoms(seed, inst.d(), inst.r(), 2);
        let mixed = mix_atoms(&atoms, &[lambda, 1.0 - lambda]).unwrap();
        let r0 = check_constraints_vectorized(&atoms[0], &inst, 1e-8);
        let r1 = check_constraints_vectorized(&atoms[1], &inst, 1e-8);
        let rm = check_constraints_vectorized(&mixed, &inst, 1e-8);
        for row in rm.rows.iter().filter(|r| r.kind != RowKind::Surrogate && !r.name.starts_with("(vi)")) {
            let a = r0.residual(&row.name).unwrap();
            let b = r1.residual(&row.name).unwrap();
            prop_assert!((row.residual - (lambda * a + (1.0 - lambda) * b)).abs() <= 1e-12, "{}", row.name);
        }
        let objs: Vec<f64> = atoms.iter().map(|a| eval_objective_vectorized(a, &inst).unwrap()).collect();
        let om = eval_objective_vectorized(&mixed, &inst).unwrap();
        let scale = 1.0 + objs[0].abs() + objs[1].abs();
        prop_assert!((om - (lambda * objs[0] + (1.0 - lambda) * objs[1])).abs() <= 1e-12 * scale);
        prop_assert_eq!(rm.membership, Some(Membership::AtomCertified));
    }

    #[test]
    fn vectorized_and_kronecker_forms_agree(k in 0usize..10, seed in any::<u64>(), mix in any::<bool>()) {
        let inst = common::gaussian_instance(common::WIDTHS[k], 4, seed);
        let atoms = feasible_atoms(seed ^ 1, inst.d(), inst.r(), 3);
        let pt = if mix { mix_atoms(&atoms, &[0.2, 0.3, 0.5]).unwrap() } else { atoms[0].clone() };
        let a = check_constraints_vectorized(&pt, &inst, 1e-8);
        let b = check_constraints_kronecker(&pt, &inst, 1e-8);
        prop_assert!(a.passed() && b.passed(), "{a}\n{b}");
        for (x, y) in names::MATCHED {
            prop_assert!((a.residual(x).unwrap() - b.residual(y).unwrap()).abs() <= 1e-10, "{x} vs {y}");
        }
        let blocks = kron_blocks(&pt).unwrap();
        prop_assert!(kron_consistency(&pt, &blocks).unwrap() <= 1e-12);
        let o1 = eval_objective_vectorized(&pt, &inst).unwrap();
        let o2 = eval_objective_kronecker(&blocks, &inst).unwrap();
        prop_assert!((o1 - o2).abs() <= 1e-10 * o1.abs().max(1.0));
    }

    #[test]
    fn no_sampled_atom_beats_the_optimum(k in 0usize..10, seed in any::<u64>()) {
        let inst = common::gaussian_instance(common::WIDTHS[k], 5, seed);
        let opt = oracle_opt(&inst).unwrap().opt_value;
        for atom in feasible_atoms(seed, inst.d(), inst.r(), 5) {
            prop_assert!(eval_objective_vectorized(&atom, &inst).unwrap() >= opt - 1e-8);
        }
    }

    #[test]
    fn converse_triples_have_bounded_rank(d in 1usize..=8, r_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let r = 1 + ((d as f64 - 1.0) * r_frac).round() as usize;
        let t = common::converse_triple(&mut random::seeded(seed), d, r);
        let rep = check_complementarity(&t, r, 1e-8);
        prop_assert!(rep.passed(), "{rep}");
        prop_assert!(numerical_rank(&t.w, DEFAULT_RANK_TOL).unwrap() <= r);
    }
}

#[test]
fn objective_kernel_is_psd() {
    for (k, widths) in common::WIDTHS.iter().enumerate() {
        let inst = common::gaussian_instance(widths, 1 + k % 8, k as u64);
        let q = objective_kernel(&inst);
        assert!(sym_eig(&q).unwrap().min_eigenvalue() >= -1e-10);
    }
}

#[test]
fn second_order_trace_is_r_squared_on_atoms() {
    let inst = common::gaussian_instance(&[3, 2, 2], 4, 1);
    for atom in feasible_atoms(2, inst.d(), inst.r(), 10) {
        let blocks = kron_blocks(&atom).unwrap();
        let r = inst.r() as f64;
        assert!((blocks.block(2, 2).trace() - r * r).abs() <= 1e-10);
        let tr = atom.atoms[0].triple.w_prime.trace();
        assert!((blocks.block(2, 2).trace() - tr * tr).abs() <= 1e-10);
    }
}

#[test]
fn optimal_atom_is_exact() {
    for (k, widths) in common::WIDTHS.iter().enumerate() {
        let inst = common::gaussian_instance(widths, 2 + k % 6, 70 + k as u64);
        let oracle = oracle_opt(&inst).unwrap();
        let atom = optimal_atom(&inst, &oracle).unwrap();
        assert!(check_constraints_vectorized(&atom, &inst, 1e-8).passed());
        assert!(check_constraints_kronecker(&atom, &inst, 1e-8).passed());
        assert!(
            (eval_objective_vectorized(&atom, &inst).unwrap() - oracle.opt_value).abs() <= 1e-8
        );
        let f = assemble_qcqp(&inst);
        assert!(f.quadratic_constraint(&atom.z).unwrap().abs() <= 1e-8);
        assert!(f
            .affine_residual(&atom.z)
            .unwrap()
            .iter()
            .all(|v| v.abs() <= 1e-8));
    }
}

#[test]
fn tampered_witness_trace_residual() {
    let inst = common::gaussian_instance(&[3, 2, 3], 4, 5);
    let p = FactorPoint::random_for(&mut random::seeded(6), &inst);
    let mut t = projector_witness(lift_to_block(&p).unwrap().w(), inst.r()).unwrap();
    t.w_prime = t.w_prime.scale(0.9);
    let rep = check_constraints_vectorized(&atom_from_triple(&t), &inst, 1e-8);
    let res = rep.residual(names::TRACE_W_PRIME).unwrap();
    assert!((res + 0.1 * inst.r() as f64).abs() <= 1e-12);
    assert!(!rep.row(names::TRACE_W_PRIME).unwrap().passed);
}

#[test]
fn solver_points_without_atoms() {
    let inst = common::gaussian_instance(&[1, 1], 2, 1);
    let atom = atom_from_triple(
        &sample_feasible_triple(&mut random::seeded(1), inst.d(), inst.r()).unwrap(),
    );
    let pt = LiftedPoint::from_bordered(&atom.bordered(), inst.d()).unwrap();
    assert!(!pt.has_atoms());
    assert!(matches!(kron_blocks(&pt), Err(Error::Unsupported(_))));
    let rep = check_constraints_vectorized(&pt, &inst, 1e-8);
    assert_eq!(rep.membership, Some(Membership::SurrogateChecked));
    assert!(rep.passed());
}

#[test]
fn mixture_weights_are_validated() {
    let atoms = feasible_atoms(3, 2, 1, 2);
    assert!(matches!(
        mix_atoms(&atoms, &[0.5, 0.6]),
        Err(Error::InvalidWeights(_))
    ));
    assert!(matches!(
        mix_atoms(&atoms, &[1.5, -0.5]),
        Err(Error::InvalidWeights(_))
    ));
    assert!(matches!(
        mix_atoms(&atoms, &[1.0]),
        Err(Error::InvalidWeights(_))
    ));
    assert!(mix_atoms(&atoms, &[1.0, 0.0]).is_ok());
}
