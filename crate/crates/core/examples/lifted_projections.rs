//! One alternating step spelled out as two projections in the lifted space.

use factor_idiv::{
    alt_step, default_init, first_partial_min, generate_sigma, lifted_div, objective, pythagoras_residual_first,
    second_partial_min, GeneratorSpec, LiftedCov,
};
use nalgebra::DMatrix;

fn main() -> factor_idiv::Result<()> {
    let sigma_hat = generate_sigma(&GeneratorSpec { n: 6, m: 3, c: 1.0, seed: 5 })?.sigma;
    let params = default_init(&sigma_hat, 2, 2)?;
    let k = params.k();

    let lifted = LiftedCov::from_factor(&params, &DMatrix::identity(k, k))?;
    let first = first_partial_min(&sigma_hat, &lifted)?;
    let second = second_partial_min(&first)?;
    let direct = alt_step(&sigma_hat, &params)?;
    println!("model difference vs alt_step: {:.3e}", (second.params.model() - direct.model()).norm());

    let before = objective(&sigma_hat, &params)?.raw();
    let after = objective(&sigma_hat, &second.params)?.raw();
    let lifted_before = lifted_div(&first, &lifted)?.raw();
    let lifted_after = lifted_div(&first, &second.lifted)?.raw();
    println!("objective {before:.8} -> {after:.8}");
    println!("lifted divergence {lifted_before:.8} -> {lifted_after:.8}");

    // any lifted matrix with the target in the upper-left block works as S0
    let s0 = LiftedCov::from_blocks(sigma_hat.matrix().clone(), first.s12() * 0.5, first.s22().clone())?;
    let residual = pythagoras_residual_first(&s0, &lifted)?;
    println!("first Pythagorean residual: {residual:.3e}");
    Ok(())
}
