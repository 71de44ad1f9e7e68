//! EM as the first projection followed by the projection with `Q^T Q` held at the identity.

use factor_idiv::{
    constrained_second_partial_min, default_init, em_step, first_partial_min, generate_sigma, GeneratorSpec, LiftedCov,
};
use nalgebra::DMatrix;

fn main() -> factor_idiv::Result<()> {
    let sigma_hat = generate_sigma(&GeneratorSpec { n: 8, m: 4, c: 2.0, seed: 6 })?.sigma;
    let mut params = default_init(&sigma_hat, 3, 0)?;
    let eye = DMatrix::identity(3, 3);
    for t in 1..=5 {
        let lifted = LiftedCov::from_factor(&params, &eye)?;
        let composed = constrained_second_partial_min(&first_partial_min(&sigma_hat, &lifted)?, &eye)?.params;
        let em = em_step(&sigma_hat, &params)?;
        println!(
            "step {t}: |H_em - H_lifted| = {:.2e}, |D_em - D_lifted| = {:.2e}",
            (em.h() - composed.h()).norm(),
            (em.d() - composed.d()).norm()
        );
        params = em;
    }
    Ok(())
}
