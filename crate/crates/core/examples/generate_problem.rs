//! Draw a random target `A A^T + c diag(d)` and inspect its spectrum.

use factor_idiv::{generate_sigma, GeneratorSpec};

fn main() -> factor_idiv::Result<()> {
    let spec = GeneratorSpec { n: 10, m: 5, c: 2.0, seed: 1 };
    let problem = generate_sigma(&spec)?;
    let eig = problem.sigma.eigenvalues();
    println!("n = {}, m = {}, c = {}, seed = {}", spec.n, spec.m, spec.c, spec.seed);
    println!("positive definite: {}", problem.positive_definite);
    println!("eigenvalues in [{:.4e}, {:.4e}]", eig.min(), eig.max());

    let small = problem.sigma.matrix().view((0, 0), (3, 3)).into_owned();
    println!("leading 3x3 block:\n{small:.4}");

    // c = 0 leaves a rank-m matrix, which fit and check reject
    let lowrank = generate_sigma(&GeneratorSpec { c: 0.0, ..spec })?;
    println!("c = 0 positive definite: {}", lowrank.positive_definite);
    Ok(())
}
