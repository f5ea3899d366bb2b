//! Kronecker/vec identities and the reshuffle map on random matrices.

use cplift::random;
use cplift::tensor::{delta_operator, kron, reshuffle, sym_eig, vec, DenseMatrix};

fn main() -> cplift::Result<()> {
    let mut rng = random::seeded(7);
    let d = 3;
    let a = random::gaussian(&mut rng, d, d);
    let w = random::gaussian(&mut rng, d, d);
    let b = random::gaussian(&mut rng, d, d);

    // vec(A W B) = (Bᵀ ⊗ A) vec(W)
    let lhs = vec(&a.matmul(&w)?.matmul(&b)?);
    let rhs = kron(&b.transpose(), &a).mat_vec(&vec(&w))?;
    let err = lhs
        .iter()
        .zip(&rhs)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    println!("kron-vec identity      max error {err:.2e}");

    let outer = DenseMatrix::outer(&vec(&a), &vec(&b));
    let swapped = reshuffle(&outer, d)?.sub(&kron(&b, &a))?.max_abs();
    println!("reshuffle(vec A vec Bᵀ) = B ⊗ A  max error {swapped:.2e}");

    let contracted = delta_operator(d).inner(&kron(&a, &b))?;
    println!(
        "⟨Δ, A ⊗ B⟩ = {contracted:.12}, ⟨A, B⟩ = {:.12}",
        a.inner(&b)?
    );

    let s = random::symmetric(&mut rng, 5);
    let e = sym_eig(&s)?;
    println!("eigenvalues {:?}", e.eigenvalues);
    println!(
        "reconstruction error {:.2e}",
        e.reconstruct().sub(&s)?.max_abs()
    );
    Ok(())
}
