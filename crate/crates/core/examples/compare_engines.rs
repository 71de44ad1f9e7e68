//! Run alt, lpd, hh and em from the same start and compare the final divergences.

use factor_idiv::{default_init, generate_sigma, run, Engine, GeneratorSpec, SolverConfig};

fn main() -> factor_idiv::Result<()> {
    let problem = generate_sigma(&GeneratorSpec { n: 10, m: 5, c: 2.0, seed: 4 })?;
    let init = default_init(&problem.sigma, 3, 1)?;
    let config = SolverConfig::fixed_iterations(300);
    for engine in [Engine::Alt, Engine::Lpd, Engine::Hh, Engine::Em] {
        let t = run(engine, &problem.sigma, &init, &config)?;
        let f = t.final_record();
        println!(
            "{:>4}: divergence {:.10e} after {} iterations ({}), ||sigma - model|| = {:.3e}",
            engine.name(),
            f.divergence,
            t.iterations,
            t.termination,
            f.l2
        );
    }
    Ok(())
}
