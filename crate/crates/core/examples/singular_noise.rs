//! Fit with the last `n2` noise variances pinned at zero.

use factor_idiv::{
    default_init, generate_sigma, run, singular_div_decomposition, stationary_structure_check, Engine, GeneratorSpec,
    SingularPattern, SolverConfig,
};

fn main() -> factor_idiv::Result<()> {
    let sigma_hat = generate_sigma(&GeneratorSpec { n: 8, m: 4, c: 1.0, seed: 7 })?.sigma;
    let k = 3;
    let init = default_init(&sigma_hat, k, 0)?;

    for n2 in 1..=k {
        let pattern = SingularPattern::new(8, n2, k)?;
        let t = run(Engine::Singular { n2 }, &sigma_hat, &init, &SolverConfig::default())?;
        let p = &t.final_params;
        let dec = singular_div_decomposition(&sigma_hat, p, pattern.split())?;
        let rep = stationary_structure_check(&sigma_hat, p, pattern)?;
        println!(
            "n2 = {n2}: {} after {} iterations, divergence {:.8}, reduced part {:.8}, trace term {:.2e}, structure residual {:.2e}",
            t.termination,
            t.iterations,
            t.final_record().divergence,
            dec.term_tilde.raw(),
            dec.trace_term,
            rep.max()
        );
    }
    Ok(())
}
