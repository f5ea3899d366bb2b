//! The objective chain for one instance: factored, rank-constrained,
//! QCQP, vectorized lift and Kronecker lift all agree at the optimum.

use cplift::cp_lift::{
    atom_from_triple, check_constraints_kronecker, check_constraints_vectorized,
    eval_objective_kronecker, eval_objective_vectorized, kron_blocks, mix_atoms,
    sample_feasible_triple,
};
use cplift::io::{generate_instance, GeneratorKind, GeneratorSpec};
use cplift::linnet::{oracle_opt, shallow_objective};
use cplift::random;
use cplift::verify::optimal_atom;

fn main() -> cplift::Result<()> {
    let inst = generate_instance(
        &GeneratorSpec::new(GeneratorKind::RandomGaussian, vec![2, 1, 2], 5),
        11,
    )?;
    let oracle = oracle_opt(&inst)?;
    let p = oracle.factor_point(inst.r())?;
    let atom = optimal_atom(&inst, &oracle)?;

    println!("factored     {:.15e}", shallow_objective(&p, &inst)?);
    println!(
        "vectorized   {:.15e}",
        eval_objective_vectorized(&atom, &inst)?
    );
    println!(
        "kronecker    {:.15e}",
        eval_objective_kronecker(&kron_blocks(&atom)?, &inst)?
    );
    println!("{}", check_constraints_vectorized(&atom, &inst, 1e-8));
    println!("{}", check_constraints_kronecker(&atom, &inst, 1e-8));

    // Convex combinations of atoms stay feasible.
    let mut rng = random::seeded(5);
    let others: Vec<_> = (0..3)
        .map(|_| sample_feasible_triple(&mut rng, inst.d(), inst.r()).map(|t| atom_from_triple(&t)))
        .collect::<cplift::Result<_>>()?;
    let mixed = mix_atoms(&others, &[0.5, 0.25, 0.25])?;
    let rep = check_constraints_vectorized(&mixed, &inst, 1e-8);
    println!(
        "mixture of 3 atoms: {} (objective {:.6e})",
        if rep.passed() {
            "feasible"
        } else {
            "INFEASIBLE"
        },
        eval_objective_vectorized(&mixed, &inst)?
    );
    Ok(())
}
