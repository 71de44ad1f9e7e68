//! Partial minimizations on the lifted space of `(n + k) x (n + k)` covariances.
//!
//! A lifted covariance has blocks `S11` (n x n), `S12` (n x k) and `S22` (k x k).
//! Two families matter: the matrices whose upper-left block equals the target
//! `sigma_hat`, and the factor-structured matrices
//! `[[HH^T + D, HQ], [(HQ)^T, Q^T Q]]`. Minimizing the divergence over either
//! family in the appropriate argument has a closed form, and the alternating
//! engines are compositions of these projections.

use nalgebra::DMatrix;

use crate::divergence::{i_div_raw, Divergence};
use crate::error::{dim_err, FaError, Result};
use crate::kernel::{assemble_symmetric, offdiag, psd_inv_sqrt, psd_sqrt, shape, spd_inverse, symmetrize, CovMatrix};
use crate::params::FactorParams;

/// Relative tolerance for membership in the factor-structured family.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// A symmetric lifted covariance, stored blockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedCov {
    s11: DMatrix<f64>,
    s12: DMatrix<f64>,
    s22: DMatrix<f64>,
}

impl LiftedCov {
    pub fn from_blocks(s11: DMatrix<f64>, s12: DMatrix<f64>, s22: DMatrix<f64>) -> Result<Self> {
        let (n, k) = (s11.nrows(), s22.nrows());
        if k == 0 {
            return Err(FaError::Structure("lifted covariance needs k >= 1 latent dimensions".into()));
        }
        if n == 0 || !s11.is_square() || !s22.is_square() || s12.shape() != (n, k) {
            return Err(dim_err(
                "LiftedCov",
                format!("S11 {n}x{n}, S12 {n}x{k}, S22 {k}x{k}"),
                format!("{}, {}, {}", shape(&s11), shape(&s12), shape(&s22)),
            ));
        }
        Ok(Self {
            s11: symmetrize(&s11),
            s12,
            s22: symmetrize(&s22),
        })
    }

    /// Splits a full symmetric matrix with observed dimension `n`.
    pub fn from_full(m: &DMatrix<f64>, n: usize) -> Result<Self> {
        let c = CovMatrix::new(m.clone())?;
        let m = c.matrix();
        let k = m.nrows().saturating_sub(n);
        Self::from_blocks(
            m.view((0, 0), (n, n)).into_owned(),
            m.view((0, n), (n, k)).into_owned(),
            m.view((n, n), (k, k)).into_owned(),
        )
    }

    /// `[[HH^T + D, HQ], [(HQ)^T, Q^T Q]]`.
    pub fn from_factor(params: &FactorParams, q: &DMatrix<f64>) -> Result<Self> {
        let k = params.k();
        if q.shape() != (k, k) {
            return Err(dim_err("LiftedCov::from_factor", format!("Q {k}x{k}"), shape(q)));
        }
        Self::from_blocks(params.model(), params.h() * q, q.transpose() * q)
    }

    pub fn n(&self) -> usize {
        self.s11.nrows()
    }

    pub fn k(&self) -> usize {
        self.s22.nrows()
    }

    pub fn s11(&self) -> &DMatrix<f64> {
        &self.s11
    }

    pub fn s12(&self) -> &DMatrix<f64> {
        &self.s12
    }

    pub fn s22(&self) -> &DMatrix<f64> {
        &self.s22
    }

    pub fn assemble(&self) -> DMatrix<f64> {
        assemble_symmetric(&self.s11, &self.s12, &self.s22)
    }

    /// `S11 - S12 S22^{-1} S21`.
    pub fn schur(&self) -> Result<DMatrix<f64>> {
        let s22_inv = spd_inverse(&self.s22, "S22")?;
        Ok(symmetrize(&(&self.s11 - &self.s12 * s22_inv * self.s12.transpose())))
    }

    /// Membership in the family with upper-left block fixed to `sigma_hat`.
    pub fn has_upper_block(&self, sigma_hat: &CovMatrix, tol: f64) -> bool {
        self.s11.shape() == sigma_hat.matrix().shape()
            && (&self.s11 - sigma_hat.matrix()).norm() <= tol * sigma_hat.matrix().norm().max(1.0)
    }

    /// Membership in the factor-structured family: `S22` positive definite and
    /// the Schur complement diagonal within [`MEMBERSHIP_TOL`].
    pub fn is_factor_structured(&self) -> bool {
        if self.s22.clone().cholesky().is_none() {
            return false;
        }
        match self.schur() {
            Ok(s) => offdiag(&s).norm() <= MEMBERSHIP_TOL * self.s11.norm(),
            Err(_) => false,
        }
    }
}

/// I-divergence between two lifted covariances.
pub fn lifted_div(a: &LiftedCov, b: &LiftedCov) -> Result<Divergence> {
    i_div_raw(&a.assemble(), &b.assemble())
}

/// Projection onto the family with upper-left block `sigma_hat`:
/// the unique minimizer of `I(S0 || sigma)` over that family.
pub fn first_partial_min(sigma_hat: &CovMatrix, sigma: &LiftedCov) -> Result<LiftedCov> {
    let n = sigma.n();
    if sigma_hat.dim() != n {
        return Err(dim_err("first_partial_min", n, sigma_hat.dim()));
    }
    let s11_inv = spd_inverse(sigma.s11(), "S11")?;
    let sh = sigma_hat.matrix();
    let t = &s11_inv * sigma.s12(); // S11^{-1} S12
    let s12 = sh * &t;
    let s22 = sigma.s22() - t.transpose() * (sigma.s11() - sh) * &t;
    LiftedCov::from_blocks(sh.clone(), s12, s22)
}

/// Result of the (unconstrained) projection onto the factor-structured family.
#[derive(Debug, Clone)]
pub struct FactorProjection {
    pub params: FactorParams,
    pub q: DMatrix<f64>,
    pub lifted: LiftedCov,
}

/// Projection of `sigma` onto the factor-structured family in the second argument:
/// `Q = S22^{1/2}`, `H = S12 S22^{-1/2}`, `D = Delta(S11 - S12 S22^{-1} S21)`.
pub fn second_partial_min(sigma: &LiftedCov) -> Result<FactorProjection> {
    let q = psd_sqrt(sigma.s22())?;
    let q_inv = psd_inv_sqrt(sigma.s22())?;
    let h = sigma.s12() * q_inv;
    let d = sigma.schur()?.diagonal();
    let params = FactorParams::new(h, d)?;
    let lifted = LiftedCov::from_blocks(params.model(), sigma.s12().clone(), sigma.s22().clone())?;
    Ok(FactorProjection { params, q, lifted })
}

/// Projection onto the factor-structured family with `Q^T Q = p0` held fixed.
///
/// `Q0` is the symmetric root of `p0` and `H = S12 S22^{-1} Q0^T`.
pub fn constrained_second_partial_min(sigma: &LiftedCov, p0: &DMatrix<f64>) -> Result<FactorProjection> {
    let k = sigma.k();
    if p0.shape() != (k, k) {
        return Err(dim_err("constrained_second_partial_min", format!("P0 {k}x{k}"), shape(p0)));
    }
    spd_inverse(p0, "P0")?;
    let q0 = psd_sqrt(p0)?;
    let s22_inv = spd_inverse(sigma.s22(), "S22")?;
    let g = sigma.s12() * &s22_inv; // S12 S22^{-1}
    let h = &g * q0.transpose();
    let d = sigma.schur()?.diagonal();
    let params = FactorParams::new(h, d)?;
    let s12 = &g * p0;
    let lifted = LiftedCov::from_blocks(params.model(), s12, symmetrize(p0))?;
    Ok(FactorProjection {
        params,
        q: q0,
        lifted,
    })
}

/// `I(S0 || S) - I(S0 || S*) - I(S* || S)` with `S*` the first projection of `S`;
/// `sigma0` must have upper-left block equal to the target.
pub fn pythagoras_residual_first(sigma0: &LiftedCov, sigma: &LiftedCov) -> Result<f64> {
    let target = CovMatrix::new(sigma0.s11().clone())?;
    let star = first_partial_min(&target, sigma)?;
    let full = lifted_div(sigma0, sigma)?.finite()?;
    let a = lifted_div(sigma0, &star)?.finite()?;
    let b = lifted_div(&star, sigma)?.finite()?;
    Ok(full - a - b)
}

/// `I(S || S1) - I(S || S*) - I(S* || S1)` with `S*` the second projection of `S`;
/// `sigma1` must be factor-structured.
pub fn pythagoras_residual_second(sigma: &LiftedCov, sigma1: &LiftedCov) -> Result<f64> {
    let star = second_partial_min(sigma)?.lifted;
    let full = lifted_div(sigma, sigma1)?.finite()?;
    let a = lifted_div(sigma, &star)?.finite()?;
    let b = lifted_div(&star, sigma1)?.finite()?;
    Ok(full - a - b)
}
