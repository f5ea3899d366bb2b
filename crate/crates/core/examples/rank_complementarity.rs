//! Block lift of a factor point and the projector witness that certifies
//! its rank through trace and complementarity conditions.

use cplift::linnet::FactorPoint;
use cplift::random;
use cplift::rank_sdp::{check_complementarity, factor_block, lift_to_block, projector_witness};
use cplift::tensor::numerical_rank;

fn main() -> cplift::Result<()> {
    let (d_out, d_in, r) = (3, 2, 1);
    let p = FactorPoint::random(&mut random::seeded(1), d_out, d_in, r);
    let lift = lift_to_block(&p)?;
    println!(
        "W is {}x{}, numerical rank {}",
        lift.w().rows(),
        lift.w().cols(),
        numerical_rank(lift.w(), 1e-8)?
    );

    let t = projector_witness(lift.w(), r)?;
    println!("{}", check_complementarity(&t, r, 1e-8));

    // Perturb W′ off the projector; the trace row now fails.
    let mut bad = t.clone();
    bad.w_prime = bad.w_prime.scale(0.9);
    println!("{}", check_complementarity(&bad, r, 1e-8));

    let back = factor_block(lift.w(), d_out, r)?;
    println!(
        "refactored product error {:.2e}",
        back.product().sub(&p.product())?.max_abs()
    );
    Ok(())
}
