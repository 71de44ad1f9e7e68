//! Parametrizations of the approximate factor model `HH^T + D`.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, FaError, Result};
use crate::kernel::{psd_sqrt, shape, symmetrize};

/// Loadings `H` (n x k) and the diagonal `D` of noise variances.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorParams {
    h: DMatrix<f64>,
    d: DVector<f64>,
}

impl FactorParams {
    pub fn new(h: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        if h.nrows() != d.len() {
            return Err(dim_err("FactorParams", format!("D of length {}", h.nrows()), d.len()));
        }
        if let Some(x) = d.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(FaError::Structure(format!("D entries must be finite and >= 0, found {x}")));
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(FaError::Structure("H has non-finite entries".into()));
        }
        Ok(Self { h, d })
    }

    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    pub fn k(&self) -> usize {
        self.h.ncols()
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>) {
        (self.h, self.d)
    }

    /// `HH^T`.
    pub fn hh(&self) -> DMatrix<f64> {
        symmetrize(&(&self.h * self.h.transpose()))
    }

    /// The model covariance `HH^T + D`.
    pub fn model(&self) -> DMatrix<f64> {
        let mut m = self.hh();
        for i in 0..self.n() {
            m[(i, i)] += self.d[i];
        }
        m
    }

    pub fn min_d(&self) -> f64 {
        self.d.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `(HU, D)`; the model matrix is unchanged for orthogonal `U`.
    pub fn rotated(&self, u: &DMatrix<f64>) -> Result<Self> {
        if u.shape() != (self.k(), self.k()) {
            return Err(dim_err("rotation", format!("{0}x{0}", self.k()), shape(u)));
        }
        Self::new(&self.h * u, self.d.clone())
    }
}

/// The `(L, P, D)` parametrization with model `L P L^T + D`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpdParams {
    l: DMatrix<f64>,
    p: DMatrix<f64>,
    d: DVector<f64>,
}

impl LpdParams {
    pub fn new(l: DMatrix<f64>, p: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        let k = l.ncols();
        if p.shape() != (k, k) {
            return Err(dim_err("LpdParams", format!("P {k}x{k}"), shape(&p)));
        }
        if l.nrows() != d.len() {
            return Err(dim_err("LpdParams", format!("D of length {}", l.nrows()), d.len()));
        }
        if p.clone().cholesky().is_none() {
            return Err(FaError::Structure("P must be positive definite".into()));
        }
        if d.iter().any(|x| !(*x >= 0.0)) {
            return Err(FaError::Structure("D entries must be >= 0".into()));
        }
        Ok(Self { l, p, d })
    }

    /// `L = H`, `P = I`.
    pub fn from_factor(params: &FactorParams) -> Self {
        Self {
            l: params.h().clone(),
            p: DMatrix::identity(params.k(), params.k()),
            d: params.d().clone(),
        }
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    /// `L P L^T + D`.
    pub fn model(&self) -> DMatrix<f64> {
        let mut m = symmetrize(&(&self.l * &self.p * self.l.transpose()));
        for i in 0..self.d.len() {
            m[(i, i)] += self.d[i];
        }
        m
    }

    /// Back to `(H, D)` with `H = L P^{1/2}` (symmetric root).
    pub fn to_factor(&self) -> Result<FactorParams> {
        let q = psd_sqrt(&self.p)?;
        FactorParams::new(&self.l * q, self.d.clone())
    }
}
