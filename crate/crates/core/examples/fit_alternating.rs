//! Fit `HH^T + D` with the alternating engine and print the trace.

use factor_idiv::{default_init, generate_sigma, run, Engine, GeneratorSpec, SolverConfig};

fn main() -> factor_idiv::Result<()> {
    let problem = generate_sigma(&GeneratorSpec { n: 10, m: 5, c: 2.0, seed: 3 })?;
    let init = default_init(&problem.sigma, 2, 0)?;
    let config = SolverConfig { max_iters: 500, ..SolverConfig::default() };
    let trace = run(Engine::Alt, &problem.sigma, &init, &config)?;

    println!("{:>5} {:>14} {:>12} {:>12}", "iter", "divergence", "r_H2", "r_D");
    for r in trace.records.iter().filter(|r| r.iter % 50 == 0 || r.iter == trace.iterations) {
        println!("{:>5} {:>14.8e} {:>12.3e} {:>12.3e}", r.iter, r.divergence, r.r_h2, r.r_d);
    }
    println!("stopped after {} iterations: {}", trace.iterations, trace.termination);
    println!("D = {:.4?}", trace.final_params.d().as_slice());
    Ok(())
}
