//! Closed-form optimum of a bottlenecked linear network, compared with
//! gradient descent on the factored objective and a deep forward pass.

use cplift::io::{generate_instance, GeneratorKind, GeneratorSpec};
use cplift::linnet::{
    collapse, deep_objective, expand_to_layers, oracle_opt, train_shallow, TrainOptions,
};

fn main() -> cplift::Result<()> {
    let spec = GeneratorSpec::new(GeneratorKind::LowRankPlusNoise, vec![4, 3, 1, 3], 12);
    let inst = generate_instance(&spec, 3)?;
    println!("widths {:?}, rank bound r = {}", inst.widths(), inst.r());

    let oracle = oracle_opt(&inst)?;
    println!(
        "optimum       {:.12e} (effective rank {})",
        oracle.opt_value, oracle.effective_rank
    );

    let out = train_shallow(&inst, &TrainOptions::default())?;
    println!(
        "trained       {:.12e} after {} iterations (grad norm {:.1e})",
        out.objective, out.iterations, out.grad_norm
    );

    // The trained factors as a full layer stack of the original widths.
    let stack = expand_to_layers(&out.point, inst.widths())?;
    println!("deep forward  {:.12e}", deep_objective(&stack, &inst)?);
    println!(
        "collapse matches U Vᵀ: {:.2e}",
        collapse(&stack).sub(&out.point.product())?.max_abs()
    );
    Ok(())
}
