//! Synthetic targets, sample covariances and exact-realization checks.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{dim_err, FaError, Result};
use crate::kernel::{offdiag, psd_sqrt, schur_raw, spd_inverse, split_blocks, symmetrize, BlockSplit, CovMatrix};
use crate::params::FactorParams;
use crate::solvers::{complement_projection, SingularPattern};

/// Parameters of the synthetic target `A A^T + c diag(d)` with `A` (n x m) and `d`
/// drawn uniformly from `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    pub n: usize,
    pub m: usize,
    pub c: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.m > self.n {
            return Err(FaError::InvalidConfig(format!(
                "need 1 <= m <= n, got n = {}, m = {}",
                self.n, self.m
            )));
        }
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(FaError::InvalidConfig(format!("c must be finite and >= 0, got {}", self.c)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub sigma: CovMatrix,
    pub a: DMatrix<f64>,
    /// Unscaled diagonal draw; the target uses `c * d`.
    pub d: DVector<f64>,
    pub c: f64,
    /// False only when `c = 0` and `m < n` leaves the target singular.
    pub positive_definite: bool,
}

/// Draws `A` row by row and then `d` from one `ChaCha8` stream seeded with `spec.seed`.
pub fn generate_sigma(spec: &GeneratorSpec) -> Result<GeneratedProblem> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut a = DMatrix::zeros(spec.n, spec.m);
    for i in 0..spec.n {
        for j in 0..spec.m {
            a[(i, j)] = rng.random::<f64>();
        }
    }
    let d = DVector::from_fn(spec.n, |_, _| rng.random::<f64>());
    sigma_from_parts(a, d, spec.c)
}

/// `A A^T + c diag(d)` from given parts.
pub fn sigma_from_parts(a: DMatrix<f64>, d: DVector<f64>, c: f64) -> Result<GeneratedProblem> {
    if a.nrows() != d.len() {
        return Err(dim_err("sigma_from_parts", a.nrows(), d.len()));
    }
    let mut s = &a * a.transpose();
    for i in 0..d.len() {
        s[(i, i)] += c * d[i];
    }
    let sigma = CovMatrix::new_psd(symmetrize(&s))?;
    let positive_definite = sigma.is_positive_definite();
    Ok(GeneratedProblem {
        sigma,
        a,
        d,
        c,
        positive_definite,
    })
}

/// `(1/N) sum_i y_i y_i^T` over the rows of `data`, optionally about the sample mean.
///
/// With fewer rows than columns the result is PSD but singular.
pub fn sample_covariance(data: &DMatrix<f64>, center: bool) -> Result<CovMatrix> {
    let rows = data.nrows();
    if rows == 0 {
        return Err(FaError::InvalidConfig("sample covariance needs at least one row".into()));
    }
    let centered;
    let y = if center {
        let mean = data.row_mean();
        centered = DMatrix::from_fn(rows, data.ncols(), |i, j| data[(i, j)] - mean[j]);
        &centered
    } else {
        data
    };
    CovMatrix::new_psd(symmetrize(&(y.transpose() * y / rows as f64)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactnessCheck {
    pub exact: bool,
    /// Frobenius norm of the off-diagonal part of `S11 - S12 S22^{-1} S21`.
    pub offdiag_norm: f64,
}

/// Relative tolerance on the off-diagonal Schur norm, against `||S11||`.
pub const EXACTNESS_TOL: f64 = 1e-8;

/// Whether the leading block is conditionally uncorrelated given the trailing block,
/// i.e. whether `S11 - S12 S22^{-1} S21` is diagonal.
pub fn exact_fa_check(sigma_hat: &CovMatrix, split: BlockSplit) -> Result<ExactnessCheck> {
    split.check(sigma_hat.dim())?;
    let schur = schur_raw(sigma_hat.matrix(), split)?;
    let (s11, _, _) = split_blocks(sigma_hat.matrix(), split);
    let offdiag_norm = offdiag(&schur).norm();
    Ok(ExactnessCheck {
        exact: offdiag_norm <= EXACTNESS_TOL * s11.norm(),
        offdiag_norm,
    })
}

/// Exact factor model with `D2 = 0` for a target passing [`exact_fa_check`]:
/// `H1 = S12 (R^{-1} 0)`, `H2 = (R 0)`, `D = diag(D1, 0)` with `R = S22^{1/2}`
/// and `D1` the (diagonal) Schur complement.
pub fn exact_fa_realization(sigma_hat: &CovMatrix, split: BlockSplit, k: usize) -> Result<FactorParams> {
    split.check(sigma_hat.dim())?;
    let (n1, n2) = (split.n1, split.n2);
    if n2 == 0 {
        return Err(FaError::Structure("exact realization needs a trailing block n2 >= 1".into()));
    }
    if n2 > k {
        return Err(FaError::InfeasiblePattern { n2, k });
    }
    let check = exact_fa_check(sigma_hat, split)?;
    if !check.exact {
        return Err(FaError::NotExactlyRealizable {
            offdiag_norm: check.offdiag_norm,
        });
    }
    let (_, s12, s22) = split_blocks(sigma_hat.matrix(), split);
    let schur = schur_raw(sigma_hat.matrix(), split)?;
    let r = psd_sqrt(&s22)?;
    let r_inv = spd_inverse(&r, "S22^{1/2}")?;

    let mut h = DMatrix::zeros(n1 + n2, k);
    h.view_mut((0, 0), (n1, n2)).copy_from(&(&s12 * r_inv));
    h.view_mut((n1, 0), (n2, n2)).copy_from(&r);
    let mut d = DVector::zeros(n1 + n2);
    for i in 0..n1 {
        d[i] = schur[(i, i)].max(0.0);
    }
    let params = FactorParams::new(h, d)?;
    let err = (params.model() - sigma_hat.matrix()).norm();
    let bound = 1e-10 * sigma_hat.matrix().norm() + check.offdiag_norm;
    if err > bound {
        return Err(FaError::Structure(format!(
            "realization reconstructs the target only to {err:.3e}"
        )));
    }
    Ok(params)
}

/// Residuals characterizing a stationary point with `D2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureReport {
    /// `||S22 - H2 H2^T||`
    pub r_s22: f64,
    /// `||S12 - H1 H2^T||`
    pub r_s12: f64,
    /// `||H~1 - S~11 (H~1 H~1^T + D1)^{-1} H~1||`
    pub r_h_tilde: f64,
    /// `||H~1 - (S~11 - H~1 H~1^T) D1^{-1} H~1||`
    pub r_h_tilde_alt: f64,
    /// `||D1 - Delta(S~11 - H~1 H~1^T)||`
    pub r_d_tilde: f64,
}

impl StructureReport {
    pub fn max(&self) -> f64 {
        [self.r_s22, self.r_s12, self.r_h_tilde, self.r_h_tilde_alt, self.r_d_tilde]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Checks the block identities `S22 = H2 H2^T`, `S12 = H1 H2^T` and the reduced
/// likelihood equations for `(H~1, D1)`, `H~1 = H1 (I - H2^T (H2 H2^T)^{-1} H2)`.
pub fn stationary_structure_check(
    sigma_hat: &CovMatrix,
    params: &FactorParams,
    pattern: SingularPattern,
) -> Result<StructureReport> {
    let split = pattern.split();
    split.check(sigma_hat.dim())?;
    if params.n() != sigma_hat.dim() {
        return Err(dim_err("stationary_structure_check", sigma_hat.dim(), params.n()));
    }
    let (n1, n2) = (pattern.n1, pattern.n2);
    let scale = sigma_hat.matrix().diagonal().max();
    if params.d().rows(n1, n2).iter().any(|x| x.abs() > 1e-12 * scale) {
        return Err(FaError::Structure("trailing noise variances must be zero".into()));
    }
    let h1 = params.h().rows(0, n1).into_owned();
    let h2 = params.h().rows(n1, n2).into_owned();
    let proj = complement_projection(&h2)?;

    let (_, s12, s22) = split_blocks(sigma_hat.matrix(), split);
    let s_tilde = schur_raw(sigma_hat.matrix(), split)?;
    let r_s22 = (&s22 - &h2 * h2.transpose()).norm();
    let r_s12 = (&s12 - &h1 * h2.transpose()).norm();

    let ht = &h1 * proj;
    let hht = symmetrize(&(&ht * ht.transpose()));
    let d1 = params.d().rows(0, n1).into_owned();
    let m = &hht + DMatrix::from_diagonal(&d1);
    let m_inv = spd_inverse(&m, "H~1 H~1^T + D1")?;
    let r_h_tilde = (&ht - &s_tilde * m_inv * &ht).norm();
    let r_h_tilde_alt = if d1.iter().all(|x| *x > 0.0) {
        let d_inv_ht = DMatrix::from_fn(n1, ht.ncols(), |i, j| ht[(i, j)] / d1[i]);
        (&ht - (&s_tilde - &hht) * d_inv_ht).norm()
    } else {
        f64::NAN
    };
    let r_d_tilde = (&d1 - (&s_tilde - &hht).diagonal()).norm();
    Ok(StructureReport {
        r_s22,
        r_s12,
        r_h_tilde,
        r_h_tilde_alt,
        r_d_tilde,
    })
}
