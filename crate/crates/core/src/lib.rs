//! Factor-analysis approximation of covariance matrices.
//!
//! Given a positive definite `sigma_hat`, find `HH^T + D` (rank-`k` loadings plus a
//! nonnegative diagonal) minimizing the Gaussian I-divergence `I(sigma_hat || HH^T + D)`.
//!
//! ```
//! use factor_idiv::{default_init, generate_sigma, run, Engine, GeneratorSpec, SolverConfig};
//!
//! let problem = generate_sigma(&GeneratorSpec { n: 6, m: 2, c: 1.0, seed: 7 }).unwrap();
//! let init = default_init(&problem.sigma, 2, 0).unwrap();
//! let trace = run(Engine::Alt, &problem.sigma, &init, &SolverConfig::default()).unwrap();
//! assert!(trace.final_record().divergence <= trace.initial_record().divergence);
//! ```

pub mod divergence;
pub mod error;
pub mod factory;
pub mod harness;
pub mod kernel;
pub mod lifted;
pub mod params;
pub mod solvers;

pub use divergence::{i_div, i_div_with_means, objective, singular_div_decomposition, Divergence, SingularDecomposition};
pub use error::{FaError, Result};
pub use factory::{
    exact_fa_check, exact_fa_realization, generate_sigma, sample_covariance, sigma_from_parts,
    stationary_structure_check, ExactnessCheck, GeneratedProblem, GeneratorSpec, StructureReport,
};
pub use kernel::{BlockSplit, CovMatrix};
pub use lifted::{
    constrained_second_partial_min, first_partial_min, lifted_div, pythagoras_residual_first,
    pythagoras_residual_second, second_partial_min, FactorProjection, LiftedCov,
};
pub use params::{FactorParams, LpdParams};
pub use solvers::{
    alt_step, default_init, em_step, hh_step, hh_step_truncated, lpd_step, run, singular_step, stationarity_residuals, Engine,
    SingularPattern, SolverConfig, SolverTrace, Termination, TraceRecord,
};
