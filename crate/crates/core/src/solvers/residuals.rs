use nalgebra::{DMatrix, DVector};

use crate::divergence::i_div_raw;
use crate::error::{dim_err, Result};
use crate::kernel::{psd_sqrt, spd_inverse, CovMatrix};
use crate::lifted::{first_partial_min, lifted_div, LiftedCov};
use crate::params::FactorParams;

use super::steps::projection_terms;

/// Norms of the violations of the maximum-likelihood equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityResiduals {
    /// `||H - (sigma_hat - HH^T) D^{-1} H||`; `None` unless `D > 0`.
    pub r_h: Option<f64>,
    /// `||H - sigma_hat (HH^T + D)^{-1} H||`.
    pub r_h2: f64,
    /// `||D - Delta(sigma_hat - HH^T)||`.
    pub r_d: f64,
}

impl StationarityResiduals {
    pub fn max(&self) -> f64 {
        self.r_h2.max(self.r_d).max(self.r_h.unwrap_or(0.0))
    }
}

pub fn stationarity_residuals(sigma_hat: &CovMatrix, params: &FactorParams) -> Result<StationarityResiduals> {
    if sigma_hat.dim() != params.n() {
        return Err(dim_err("stationarity_residuals", sigma_hat.dim(), params.n()));
    }
    let sh = sigma_hat.matrix();
    let h = params.h();
    let d = params.d();
    let hh = params.hh();
    let gap = sh - &hh;

    let r_h = (params.min_d() > 0.0).then(|| {
        let d_inv_h = DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)] / d[i]);
        (h - &gap * d_inv_h).norm()
    });
    let s_inv = spd_inverse(&params.model(), "HH^T + D")?;
    let r_h2 = (h - sh * s_inv * h).norm();
    let r_d = (d - gap.diagonal()).norm();
    Ok(StationarityResiduals { r_h, r_h2, r_d })
}

/// Residuals of the limit-point equations of the `HH` recursion:
/// `(||HH - sigma_hat (HH + D)^{-1} HH||, ||D - Delta(sigma_hat - HH)||)`.
pub fn hh_residuals(sigma_hat: &CovMatrix, hh: &DMatrix<f64>, d: &DVector<f64>) -> Result<(f64, f64)> {
    let sh = sigma_hat.matrix();
    let s_inv = spd_inverse(&(hh + DMatrix::from_diagonal(d)), "HH + D")?;
    let r1 = (hh - sh * s_inv * hh).norm();
    let r2 = (d - (sh - hh).diagonal()).norm();
    Ok((r1, r2))
}

/// Both sides of the per-step decrease identity of the alternating engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepGain {
    /// `I(sigma_hat || model_t) - I(sigma_hat || model_{t+1})`.
    pub div_drop: f64,
    /// `I(S1_{t+1} || S1_t) + I(S0_t || S0_{t+1})` on the lifted space.
    pub lifted_gain: f64,
}

/// Evaluates the divergence drop between consecutive alternating iterates and the
/// sum of the two lifted divergences it decomposes into.
///
/// The lifted iterates are rebuilt with `Q_t = I` (both sides are invariant under
/// the common congruence by `diag(I, Q_t)`), `Q_{t+1} = R_t^{1/2}`.
pub fn step_gain_decomposition(
    sigma_hat: &CovMatrix,
    params_t: &FactorParams,
    params_t1: &FactorParams,
) -> Result<StepGain> {
    let sh = sigma_hat.matrix();
    let div_t = i_div_raw(sh, &params_t.model())?.finite()?;
    let div_t1 = i_div_raw(sh, &params_t1.model())?.finite()?;

    let k = params_t.k();
    let (_, r) = projection_terms(sh, params_t)?;
    let q_t1 = psd_sqrt(&r)?;

    let lifted_t = LiftedCov::from_factor(params_t, &DMatrix::identity(k, k))?;
    let lifted_t1 = LiftedCov::from_factor(params_t1, &q_t1)?;
    let zero_t = first_partial_min(sigma_hat, &lifted_t)?;
    let zero_t1 = first_partial_min(sigma_hat, &lifted_t1)?;

    let lifted_gain = lifted_div(&lifted_t1, &lifted_t)?.finite()? + lifted_div(&zero_t, &zero_t1)?.finite()?;
    Ok(StepGain {
        div_drop: div_t - div_t1,
        lifted_gain,
    })
}
