//! Iterative engines for `min I(sigma_hat || HH^T + D)`.
//!
//! Five engines share one driver, [`run`]:
//!
//! * `Alt`: the alternating-projection update on `(H, D)` with a symmetric root of `R`.
//! * `Lpd`: the same iteration in the `(L, P, D)` parametrization, free of square roots.
//! * `Hh`: the same iteration on `HH = H H^T`.
//! * `Em`: the classical EM update (alternating projections with the latent
//!   covariance held fixed in the second projection).
//! * `Singular`: the reduced `HH` recursion when the trailing `n2` noise
//!   variances are constrained to zero.
//!
//! `Alt`, `Lpd` and `Hh` produce the same model matrices from matched starts.

mod init;
mod residuals;
mod steps;

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::divergence::i_div_raw;
use crate::error::{FaError, Result};
use crate::kernel::{l2_diff, CovMatrix};
use crate::params::{FactorParams, LpdParams};

pub use init::default_init;
pub use residuals::{hh_residuals, stationarity_residuals, step_gain_decomposition, StationarityResiduals, StepGain};
pub use steps::{
    alt_step, complement_projection, compute_r, compute_r_low_rank, em_step, hh_step, hh_step_truncated, lpd_step, singular_step,
    SingularPattern, SingularProblem,
};

pub(crate) use steps::top_factor;

/// Allowed increase of the divergence between consecutive iterates.
pub const MONOTONICITY_SLACK: f64 = 1e-10;
/// Noise variances below this mark an approach to the boundary `D` singular.
pub const BOUNDARY_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Alt,
    Lpd,
    Hh,
    Em,
    Singular { n2: usize },
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Alt => "alt",
            Engine::Lpd => "lpd",
            Engine::Hh => "hh",
            Engine::Em => "em",
            Engine::Singular { .. } => "singular",
        }
    }

    /// Parses an engine name; `n2` is required for `singular`.
    pub fn parse(name: &str, n2: Option<usize>) -> Result<Self> {
        Ok(match name {
            "alt" => Engine::Alt,
            "lpd" => Engine::Lpd,
            "hh" => Engine::Hh,
            "em" => Engine::Em,
            "singular" => Engine::Singular {
                n2: n2.ok_or_else(|| FaError::InvalidConfig("engine singular requires n2".into()))?,
            },
            other => return Err(FaError::InvalidConfig(format!("unknown engine {other:?}"))),
        })
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once the divergence decreases by less than this in one step.
    pub div_tol: f64,
    /// Stop once `max(r_H2, r_D)` falls below this.
    pub residual_tol: f64,
    /// Record every `record_every`-th iterate (the first and last are always recorded).
    pub record_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            div_tol: 1e-12,
            residual_tol: 1e-12,
            record_every: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.record_every == 0 {
            return Err(FaError::InvalidConfig("max_iters and record_every must be >= 1".into()));
        }
        if !(self.div_tol > 0.0) || !(self.residual_tol > 0.0) {
            return Err(FaError::InvalidConfig("tolerances must be > 0".into()));
        }
        Ok(())
    }

    /// A config that runs exactly `iters` steps unless a fixed point is hit.
    pub fn fixed_iterations(iters: usize) -> Self {
        Self {
            max_iters: iters,
            div_tol: f64::MIN_POSITIVE,
            residual_tol: f64::MIN_POSITIVE,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The model matrix did not move in the last step.
    FixedPoint,
    /// Singular engine with `n2 = k`: the first iterate is the exact minimizer.
    OneStepConvergence,
    DivergenceTolerance,
    ResidualTolerance,
    MaxIters,
}

impl Termination {
    pub fn converged(&self) -> bool {
        !matches!(self, Termination::MaxIters)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::FixedPoint => "fixed point",
            Termination::OneStepConvergence => "one-step convergence",
            Termination::DivergenceTolerance => "divergence tolerance",
            Termination::ResidualTolerance => "residual tolerance",
            Termination::MaxIters => "max iterations",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    /// Raw `I(sigma_hat || H_t H_t^T + D_t)`.
    pub divergence: f64,
    /// `||sigma_hat - (H_t H_t^T + D_t)||`.
    pub l2: f64,
    /// Lifted gain of the step into this iterate (alternating engine only).
    pub gain: Option<f64>,
    pub r_h: Option<f64>,
    pub r_h2: f64,
    pub r_d: f64,
    pub min_d: f64,
}

/// Noise variances that fell below [`BOUNDARY_THRESHOLD`] in an unconstrained run.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryWarning {
    pub iter: usize,
    pub indices: Vec<usize>,
}

impl BoundaryWarning {
    /// Suggested trailing-zero count for the singular engine (after permuting `indices` last).
    pub fn suggested_n2(&self) -> usize {
        self.indices.len()
    }
}

#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub engine: Engine,
    pub records: Vec<TraceRecord>,
    /// Number of steps taken.
    pub iterations: usize,
    pub termination: Termination,
    pub final_params: FactorParams,
    pub boundary: Option<BoundaryWarning>,
}

impl SolverTrace {
    pub fn final_record(&self) -> &TraceRecord {
        self.records.last().expect("trace always holds the initial record")
    }

    pub fn initial_record(&self) -> &TraceRecord {
        &self.records[0]
    }
}

enum State {
    Factor(FactorParams),
    Lpd(LpdParams),
    Hh { hh: DMatrix<f64>, d: DVector<f64>, k: usize },
    Singular { problem: SingularProblem, ht: DMatrix<f64>, dt: DVector<f64> },
}

impl State {
    fn model(&self) -> DMatrix<f64> {
        match self {
            State::Factor(p) => p.model(),
            State::Lpd(p) => p.model(),
            State::Hh { hh, d, .. } => hh + DMatrix::from_diagonal(d),
            State::Singular { problem, ht, dt } => {
                let (hh, d) = problem.reassemble(ht, dt);
                hh + DMatrix::from_diagonal(&d)
            }
        }
    }

    fn factor(&self) -> Result<FactorParams> {
        match self {
            State::Factor(p) => Ok(p.clone()),
            State::Lpd(p) => p.to_factor(),
            State::Hh { hh, d, k } => FactorParams::new(top_factor(hh, *k), d.clone()),
            State::Singular { problem, ht, dt } => problem.factor(ht, dt),
        }
    }

    fn step(&self, engine: Engine, sigma_hat: &CovMatrix) -> Result<State> {
        Ok(match (self, engine) {
            (State::Factor(p), Engine::Alt) => State::Factor(alt_step(sigma_hat, p)?),
            (State::Factor(p), Engine::Em) => State::Factor(em_step(sigma_hat, p)?),
            (State::Lpd(p), _) => State::Lpd(lpd_step(sigma_hat, p)?),
            (State::Hh { hh, d, k }, _) => {
                let next = hh_step_truncated(sigma_hat, hh, d, *k)?;
                let d_next = steps::residual_diagonal(sigma_hat.matrix(), &next);
                State::Hh { hh: next, d: d_next, k: *k }
            }
            (State::Singular { problem, ht, dt }, _) => {
                let (ht, dt) = problem.step(ht, dt)?;
                State::Singular { problem: problem.clone(), ht, dt }
            }
            (State::Factor(_), _) => unreachable!("factor state only drives alt and em"),
        })
    }
}

fn record(
    sigma_hat: &CovMatrix,
    state: &State,
    iter: usize,
    divergence: f64,
    model: &DMatrix<f64>,
    gain: Option<f64>,
) -> Result<TraceRecord> {
    let params = state.factor()?;
    let res = stationarity_residuals(sigma_hat, &params)?;
    Ok(TraceRecord {
        iter,
        divergence,
        l2: l2_diff(sigma_hat.matrix(), model)?,
        gain,
        r_h: res.r_h,
        r_h2: res.r_h2,
        r_d: res.r_d,
        min_d: params.min_d(),
    })
}

/// Runs `engine` from `init` until a stopping rule fires.
///
/// Returns [`FaError::MonotonicityViolation`] if the divergence ever increases by more
/// than [`MONOTONICITY_SLACK`].
pub fn run(engine: Engine, sigma_hat: &CovMatrix, init: &FactorParams, config: &SolverConfig) -> Result<SolverTrace> {
    config.validate()?;
    let n = sigma_hat.dim();
    if init.n() != n {
        return Err(crate::error::dim_err("run", n, init.n()));
    }
    let k = init.k();

    let (mut state, start) = match engine {
        Engine::Alt | Engine::Em => (State::Factor(init.clone()), init.clone()),
        Engine::Lpd => (State::Lpd(LpdParams::from_factor(init)), init.clone()),
        Engine::Hh => (State::Hh { hh: init.hh(), d: init.d().clone(), k }, init.clone()),
        Engine::Singular { n2 } => {
            let pattern = SingularPattern::new(n, n2, k)?;
            let problem = SingularProblem::new(sigma_hat, pattern, k)?;
            let (ht, dt) = problem.reduce(init)?;
            // the run starts from the initial point with its trailing variances zeroed
            let mut d0 = init.d().clone();
            d0.rows_mut(pattern.n1, n2).fill(0.0);
            (State::Singular { problem, ht, dt }, FactorParams::new(init.h().clone(), d0)?)
        }
    };

    let model0 = start.model();
    let div0 = i_div_raw(sigma_hat.matrix(), &model0)?.finite()?;
    let mut records = vec![record(sigma_hat, &State::Factor(start.clone()), 0, div0, &model0, None)?];

    let scale = 1.0 + sigma_hat.matrix().norm();
    if (&model0 - sigma_hat.matrix()).norm() <= 1e-12 * scale {
        return Ok(SolverTrace {
            engine,
            records,
            iterations: 0,
            termination: Termination::FixedPoint,
            final_params: start,
            boundary: None,
        });
    }
    let mut prev_div = div0;
    let mut prev_model = model0;
    let mut boundary = None;
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;

    for t in 1..=config.max_iters {
        let next = state.step(engine, sigma_hat)?;
        let model = next.model();
        let div = i_div_raw(sigma_hat.matrix(), &model)?.finite()?;
        if div > prev_div + MONOTONICITY_SLACK {
            return Err(FaError::MonotonicityViolation {
                iter: t,
                previous: prev_div,
                current: div,
            });
        }
        iterations = t;

        let stop = if matches!(engine, Engine::Singular { n2 } if n2 == k) {
            Some(Termination::OneStepConvergence)
        } else if (&model - &prev_model).norm() <= 1e-12 * scale {
            Some(Termination::FixedPoint)
        } else if prev_div - div < config.div_tol {
            Some(Termination::DivergenceTolerance)
        } else {
            None
        };

        let params = next.factor()?;
        if !matches!(engine, Engine::Singular { .. }) && params.min_d() < BOUNDARY_THRESHOLD {
            boundary = Some(BoundaryWarning {
                iter: t,
                indices: (0..n).filter(|&i| params.d()[i] < BOUNDARY_THRESHOLD).collect(),
            });
        }
        let res = stationarity_residuals(sigma_hat, &params)?;
        let stop = stop.or_else(|| {
            (res.r_h2.max(res.r_d) < config.residual_tol).then_some(Termination::ResidualTolerance)
        });
        let stop = stop.or_else(|| (t == config.max_iters).then_some(Termination::MaxIters));

        if stop.is_some() || t % config.record_every == 0 {
            let gain = match (engine, &state) {
                (Engine::Alt, State::Factor(prev)) => {
                    Some(step_gain_decomposition(sigma_hat, prev, &params)?.lifted_gain)
                }
                _ => None,
            };
            records.push(TraceRecord {
                iter: t,
                divergence: div,
                l2: l2_diff(sigma_hat.matrix(), &model)?,
                gain,
                r_h: res.r_h,
                r_h2: res.r_h2,
                r_d: res.r_d,
                min_d: params.min_d(),
            });
        }

        state = next;
        prev_div = div;
        prev_model = model;
        if let Some(reason) = stop {
            termination = reason;
            break;
        }
    }

    Ok(SolverTrace {
        engine,
        records,
        iterations,
        termination,
        final_params: state.factor()?,
        boundary,
    })
}
