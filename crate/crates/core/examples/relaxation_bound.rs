//! PSD relaxation of the lifted program solved with ADMM, sandwiched
//! against the closed-form optimum.

use cplift::cp_lift::assemble_qcqp;
use cplift::io::{generate_instance, GeneratorKind, GeneratorSpec};
use cplift::relax::{build_relaxation, certify_sandwich, solve, SolveOptions};

fn main() -> cplift::Result<()> {
    let inst = generate_instance(
        &GeneratorSpec::new(GeneratorKind::RandomGaussian, vec![2, 1, 2], 6),
        2,
    )?;
    let prob = build_relaxation(&assemble_qcqp(&inst), &inst)?;
    println!(
        "blocks {:?}, {} affine rows",
        prob.block_sizes,
        prob.constraints.len()
    );

    let res = solve(&prob, &SolveOptions::default())?;
    println!(
        "{} after {} iterations: primal {:.1e}, dual {:.1e}",
        if res.converged {
            "converged"
        } else {
            "stopped"
        },
        res.iterations,
        res.primal_residual,
        res.dual_residual
    );
    let s = certify_sandwich(&inst, &res, 1e-6)?;
    println!(
        "lower bound {:.9e} <= optimum {:.9e} (gap {:.3e})",
        s.lower_bound, s.opt_value, s.gap
    );
    Ok(())
}
