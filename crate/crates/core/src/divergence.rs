//! I-divergence (Kullback-Leibler divergence) between zero-mean Gaussian laws.
//!
//! For covariances `S1`, `S2` of size `m`,
//! `I(S1 || S2) = 1/2 log(|S2| / |S1|) - m/2 + 1/2 tr(S2^{-1} S1)`.
//! Log-determinants come from a Cholesky factor of each argument, so large
//! dimensions do not overflow an explicit determinant.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, singular, FaError, Result};
use crate::kernel::{shape, spd_inverse, split_blocks, symmetrize, BlockSplit, CovMatrix};
use crate::params::FactorParams;

/// Values with magnitude below this are reported as exactly zero.
pub const ZERO_CLAMP: f64 = 1e-12;

/// An I-divergence in nats, or the infinite value taken when the second law is degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    /// The computed value, including tiny negative round-off. `+inf` for [`Divergence::Infinite`].
    pub fn raw(&self) -> f64 {
        match *self {
            Divergence::Finite(v) => v,
            Divergence::Infinite => f64::INFINITY,
        }
    }

    /// The reported value: clamped to `0` within [`ZERO_CLAMP`].
    pub fn nats(&self) -> f64 {
        match *self {
            Divergence::Finite(v) if v.abs() < ZERO_CLAMP => 0.0,
            Divergence::Finite(v) => v,
            Divergence::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Divergence::Infinite)
    }

    /// The raw value, or an error when infinite.
    pub fn finite(&self) -> Result<f64> {
        match *self {
            Divergence::Finite(v) => Ok(v),
            Divergence::Infinite => Err(singular("second argument of the divergence")),
        }
    }
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Divergence::Finite(_) => write!(f, "{:.6e}", self.nats()),
            Divergence::Infinite => f.write_str("inf"),
        }
    }
}

pub(crate) fn i_div_raw(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Result<Divergence> {
    if !s1.is_square() || s1.shape() != s2.shape() {
        return Err(dim_err("i_div", shape(s1), shape(s2)));
    }
    let m = s1.nrows() as f64;
    let c1 = symmetrize(s1)
        .cholesky()
        .ok_or_else(|| singular("first argument of the divergence"))?;
    let Some(c2) = symmetrize(s2).cholesky() else {
        return Ok(Divergence::Infinite);
    };
    let ld1: f64 = 2.0 * c1.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let ld2: f64 = 2.0 * c2.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let tr = c2.solve(s1).trace();
    let v = 0.5 * (ld2 - ld1 - m + tr);
    if !v.is_finite() {
        return Ok(Divergence::Infinite);
    }
    Ok(Divergence::Finite(v))
}

/// `I(S1 || S2)` for zero-mean Gaussians.
pub fn i_div(s1: &CovMatrix, s2: &CovMatrix) -> Result<Divergence> {
    i_div_raw(s1.matrix(), s2.matrix())
}

/// I-divergence between `N(mu1, S1)` and `N(mu2, S2)`:
/// `i_div(S1, S2) + 1/2 (mu1 - mu2)^T S2^{-1} (mu1 - mu2)`.
pub fn i_div_with_means(
    mu1: &DVector<f64>,
    s1: &CovMatrix,
    mu2: &DVector<f64>,
    s2: &CovMatrix,
) -> Result<Divergence> {
    if mu1.len() != s1.dim() || mu2.len() != s2.dim() {
        return Err(dim_err("i_div_with_means", s1.dim(), format!("{}/{}", mu1.len(), mu2.len())));
    }
    let base = i_div(s1, s2)?;
    let Divergence::Finite(v) = base else {
        return Ok(base);
    };
    let diff = mu1 - mu2;
    let chol = s2.matrix().clone().cholesky().ok_or_else(|| singular("S2"))?;
    let quad = diff.dot(&chol.solve(&diff));
    Ok(Divergence::Finite(v + 0.5 * quad))
}

/// The approximation criterion `I(sigma_hat || HH^T + D)`.
pub fn objective(sigma_hat: &CovMatrix, params: &FactorParams) -> Result<Divergence> {
    if params.n() != sigma_hat.dim() {
        return Err(dim_err("objective", sigma_hat.dim(), params.n()));
    }
    i_div_raw(sigma_hat.matrix(), &params.model())
}

/// The three terms of the divergence split for a model whose trailing `n2` noise
/// variances vanish and whose loadings are in the reduced form
/// `H = [[H11, H12], [0, H22]]` with `H22` (n2 x n2) invertible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularDecomposition {
    /// `I(S~11 || H11 H11^T + D1)` with `S~11` the Schur complement of `sigma_hat`.
    pub term_tilde: Divergence,
    /// `I(S22 || H22 H22^T)`.
    pub term_22: Divergence,
    /// `1/2 tr(S22 K^T (H11 H11^T + D1)^{-1} K)`, `K = S12 S22^{-1} - H12 H22^{-1}`.
    pub trace_term: f64,
}

impl SingularDecomposition {
    pub fn total(&self) -> f64 {
        self.term_tilde.raw() + self.term_22.raw() + self.trace_term
    }
}

pub fn singular_div_decomposition(
    sigma_hat: &CovMatrix,
    params: &FactorParams,
    split: BlockSplit,
) -> Result<SingularDecomposition> {
    let n = sigma_hat.dim();
    split.check(n)?;
    if params.n() != n {
        return Err(dim_err("singular_div_decomposition", n, params.n()));
    }
    let (n1, n2, k) = (split.n1, split.n2, params.k());
    if n2 == 0 || n2 > k {
        return Err(FaError::Structure(format!(
            "singular split needs 1 <= n2 <= k, got n2 = {n2}, k = {k}"
        )));
    }
    let h = params.h();
    let d = params.d();
    if d.rows(n1, n2).iter().any(|x| *x != 0.0) {
        return Err(FaError::Structure("trailing noise variances must be zero".into()));
    }
    let kf = k - n2;
    let h21 = h.view((n1, 0), (n2, kf));
    if h21.norm() > 1e-12 * h.norm().max(1.0) {
        return Err(FaError::Structure("loadings not in reduced form: H21 != 0".into()));
    }
    let h11 = h.view((0, 0), (n1, kf)).into_owned();
    let h12 = h.view((0, kf), (n1, n2)).into_owned();
    let h22 = h.view((n1, kf), (n2, n2)).into_owned();
    let h22_inv = h22
        .clone()
        .try_inverse()
        .ok_or_else(|| FaError::Structure("H22 must be invertible".into()))?;

    let (s11, s12, s22) = split_blocks(sigma_hat.matrix(), split);
    let s22_inv = spd_inverse(&s22, "S22")?;
    let s_tilde = symmetrize(&(&s11 - &s12 * &s22_inv * s12.transpose()));

    let mut m1 = symmetrize(&(&h11 * h11.transpose()));
    for i in 0..n1 {
        m1[(i, i)] += d[i];
    }
    let term_tilde = i_div_raw(&s_tilde, &m1)?;
    let term_22 = i_div_raw(&s22, &symmetrize(&(&h22 * h22.transpose())))?;

    let kmat = &s12 * &s22_inv - &h12 * &h22_inv;
    let m1_inv = spd_inverse(&m1, "H11 H11^T + D1")?;
    let trace_term = 0.5 * (&s22 * kmat.transpose() * m1_inv * &kmat).trace();

    Ok(SingularDecomposition {
        term_tilde,
        term_22,
        trace_term,
    })
}
