//! Single-step update maps of the iterative engines.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, FaError, Result};
use crate::kernel::{inverse, psd_inv_sqrt, spd_inverse, split_blocks, symmetrize, BlockSplit, CovMatrix};
use crate::params::{FactorParams, LpdParams};

fn check_dims(sigma_hat: &CovMatrix, n: usize, what: &'static str) -> Result<()> {
    if sigma_hat.dim() != n {
        return Err(dim_err(what, sigma_hat.dim(), n));
    }
    Ok(())
}

/// `Delta(sigma - m)` as a vector, with round-off below zero clamped to zero.
pub(crate) fn residual_diagonal(sigma: &DMatrix<f64>, m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(sigma.nrows(), |i, _| (sigma[(i, i)] - m[(i, i)]).max(0.0))
}

/// `(HH^T + D)^{-1} H` and the `k x k` matrix
/// `R = I - H^T (HH^T + D)^{-1} H + H^T (HH^T + D)^{-1} sigma_hat (HH^T + D)^{-1} H`.
///
/// Takes the `k x k` route when `D > 0` and `n > 2k`.
pub(crate) fn projection_terms(
    sigma_hat: &DMatrix<f64>,
    params: &FactorParams,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if params.min_d() > 0.0 && params.n() > 2 * params.k() {
        low_rank_terms(sigma_hat, params)
    } else {
        direct_terms(sigma_hat, params)
    }
}

fn direct_terms(sigma_hat: &DMatrix<f64>, params: &FactorParams) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let h = params.h();
    let k = params.k();
    let s_inv = spd_inverse(&params.model(), "HH^T + D")?;
    let g = s_inv * h;
    let r = DMatrix::identity(k, k) - h.transpose() * &g + g.transpose() * sigma_hat * &g;
    Ok((g, symmetrize(&r)))
}

fn low_rank_terms(sigma_hat: &DMatrix<f64>, params: &FactorParams) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let h = params.h();
    let k = params.k();
    let d_inv_h = DMatrix::from_fn(h.nrows(), k, |i, j| h[(i, j)] / params.d()[i]);
    let w = spd_inverse(
        &(DMatrix::identity(k, k) + h.transpose() * &d_inv_h),
        "I + H^T D^-1 H",
    )?;
    let g = d_inv_h * &w;
    let r = &w + g.transpose() * sigma_hat * &g;
    Ok((g, symmetrize(&r)))
}

/// The `k x k` matrix `R` entering the loading updates, evaluated as
/// `I - H^T S^{-1} H + H^T S^{-1} sigma_hat S^{-1} H` with `S = HH^T + D`.
pub fn compute_r(sigma_hat: &CovMatrix, params: &FactorParams) -> Result<DMatrix<f64>> {
    check_dims(sigma_hat, params.n(), "compute_r")?;
    Ok(direct_terms(sigma_hat.matrix(), params)?.1)
}

/// `R` through `k x k` inversions only:
/// `R = W + W H^T D^{-1} sigma_hat D^{-1} H W`, `W = (I + H^T D^{-1} H)^{-1}`. Needs `D > 0`.
pub fn compute_r_low_rank(sigma_hat: &CovMatrix, params: &FactorParams) -> Result<DMatrix<f64>> {
    check_dims(sigma_hat, params.n(), "compute_r_low_rank")?;
    if params.min_d() <= 0.0 {
        return Err(FaError::Structure("k x k route needs D > 0".into()));
    }
    Ok(low_rank_terms(sigma_hat.matrix(), params)?.1)
}

/// One step of the alternating I-divergence minimization:
/// `H' = sigma_hat (HH^T + D)^{-1} H R^{-1/2}`, `D' = Delta(sigma_hat - H' H'^T)`.
pub fn alt_step(sigma_hat: &CovMatrix, params: &FactorParams) -> Result<FactorParams> {
    check_dims(sigma_hat, params.n(), "alt_step")?;
    let sh = sigma_hat.matrix();
    let (g, r) = projection_terms(sh, params)?;
    let h_next = sh * g * psd_inv_sqrt(&r)?;
    let d_next = residual_diagonal(sh, &(&h_next * h_next.transpose()));
    FactorParams::new(h_next, d_next)
}

/// One step in the `(L, P, D)` parametrization; no square roots are taken.
pub fn lpd_step(sigma_hat: &CovMatrix, params: &LpdParams) -> Result<LpdParams> {
    let n = params.l().nrows();
    check_dims(sigma_hat, n, "lpd_step")?;
    let sh = sigma_hat.matrix();
    let s = params.model();
    let s_inv = spd_inverse(&s, "L P L^T + D")?;
    let m = &s_inv * params.l() * params.p(); // S^{-1} L P
    let p_next = symmetrize(&(params.p() - m.transpose() * (&s - sh) * &m));
    let l_next = sh * &m * spd_inverse(&p_next, "P_{t+1}")?;
    let d_next = residual_diagonal(sh, &(&l_next * &p_next * l_next.transpose()));
    LpdParams::new(l_next, p_next, d_next)
}

pub(crate) fn hh_step_raw(sigma: &DMatrix<f64>, hh: &DMatrix<f64>, d: &DVector<f64>) -> Result<DMatrix<f64>> {
    let dm = DMatrix::from_diagonal(d);
    let a = spd_inverse(&(hh + &dm), "HH + D")? * hh;
    let b = &dm + sigma * &a;
    let b_inv = inverse(&b, "D + sigma_hat (HH + D)^-1 HH")?;
    Ok(symmetrize(&(sigma * a * b_inv * sigma)))
}

/// One step of the recursion on `HH = H H^T`:
/// `HH' = sigma_hat (HH + D)^{-1} HH (D + sigma_hat (HH + D)^{-1} HH)^{-1} sigma_hat`.
pub fn hh_step(sigma_hat: &CovMatrix, hh: &DMatrix<f64>, d: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = sigma_hat.dim();
    if hh.shape() != (n, n) || d.len() != n {
        return Err(dim_err("hh_step", format!("{n}x{n} and {n}"), format!("{}x{} and {}", hh.nrows(), hh.ncols(), d.len())));
    }
    hh_step_raw(sigma_hat.matrix(), hh, d)
}

/// [`hh_step`] followed by projection onto the nearest rank-`k` PSD matrix.
///
/// The plain recursion keeps rank `k` only in exact arithmetic; rounding errors outside
/// the range of `HH` are amplified from step to step and eventually make `HH + D` singular.
pub fn hh_step_truncated(sigma_hat: &CovMatrix, hh: &DMatrix<f64>, d: &DVector<f64>, k: usize) -> Result<DMatrix<f64>> {
    let h = top_factor(&hh_step(sigma_hat, hh, d)?, k);
    Ok(&h * h.transpose())
}

/// One EM step: `H' = sigma_hat (HH^T + D)^{-1} H R^{-1}`, `D' = Delta(sigma_hat - H' R H'^T)`.
pub fn em_step(sigma_hat: &CovMatrix, params: &FactorParams) -> Result<FactorParams> {
    check_dims(sigma_hat, params.n(), "em_step")?;
    let sh = sigma_hat.matrix();
    let (g, r) = projection_terms(sh, params)?;
    let h_next = sh * g * spd_inverse(&r, "R")?;
    let d_next = residual_diagonal(sh, &(&h_next * &r * h_next.transpose()));
    FactorParams::new(h_next, d_next)
}

/// Constraint that the trailing `n2` noise variances vanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularPattern {
    pub n1: usize,
    pub n2: usize,
}

impl SingularPattern {
    /// Pattern for dimension `n` with `n2` trailing zeros, feasible for `k` factors.
    pub fn new(n: usize, n2: usize, k: usize) -> Result<Self> {
        if n2 > k {
            return Err(FaError::InfeasiblePattern { n2, k });
        }
        if n2 == 0 || n2 >= n {
            return Err(FaError::Structure(format!("need 1 <= n2 < n, got n2 = {n2}, n = {n}")));
        }
        Ok(Self { n1: n - n2, n2 })
    }

    pub fn split(&self) -> BlockSplit {
        BlockSplit {
            n1: self.n1,
            n2: self.n2,
        }
    }
}

/// Precomputed blocks of the target for the recursion with `D2 = 0`.
#[derive(Debug, Clone)]
pub struct SingularProblem {
    pattern: SingularPattern,
    k: usize,
    s12: DMatrix<f64>,
    s22: DMatrix<f64>,
    /// `S12 S22^{-1} S21`
    border: DMatrix<f64>,
    /// `S11 - S12 S22^{-1} S21`
    s_tilde: DMatrix<f64>,
}

impl SingularProblem {
    pub fn new(sigma_hat: &CovMatrix, pattern: SingularPattern, k: usize) -> Result<Self> {
        if pattern.n2 > k {
            return Err(FaError::InfeasiblePattern { n2: pattern.n2, k });
        }
        pattern.split().check(sigma_hat.dim())?;
        let (s11, s12, s22) = split_blocks(sigma_hat.matrix(), pattern.split());
        let s22_inv = spd_inverse(&s22, "S22")?;
        let border = symmetrize(&(&s12 * &s22_inv * s12.transpose()));
        let s_tilde = symmetrize(&(&s11 - &border));
        Ok(Self {
            pattern,
            k,
            s12,
            s22,
            border,
            s_tilde,
        })
    }

    pub fn pattern(&self) -> SingularPattern {
        self.pattern
    }

    /// The Schur complement `S11 - S12 S22^{-1} S21`.
    pub fn s_tilde(&self) -> &DMatrix<f64> {
        &self.s_tilde
    }

    /// Reduced starting point `(H1 P H1^T, D0[..n1])` with
    /// `P = I - H2^T (H2 H2^T)^{-1} H2`.
    pub fn reduce(&self, init: &FactorParams) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let (n1, n2) = (self.pattern.n1, self.pattern.n2);
        if init.k() != self.k || init.n() != n1 + n2 {
            return Err(dim_err("SingularProblem::reduce", format!("{}x{}", n1 + n2, self.k), format!("{}x{}", init.n(), init.k())));
        }
        let h1 = init.h().rows(0, n1).into_owned();
        let h2 = init.h().rows(n1, n2).into_owned();
        let proj = complement_projection(&h2)?;
        let ht = symmetrize(&(&h1 * proj * h1.transpose()));
        let dt = init.d().rows(0, n1).into_owned();
        if dt.iter().any(|x| *x <= 0.0) {
            return Err(FaError::Structure("leading noise variances must be > 0".into()));
        }
        Ok((ht, dt))
    }

    /// One step of the reduced recursion on `n1 x n1` matrices, kept at rank `k - n2`.
    pub fn step(&self, ht: &DMatrix<f64>, dt: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let n1 = self.pattern.n1;
        if ht.shape() != (n1, n1) || dt.len() != n1 {
            return Err(dim_err("singular_step", n1, format!("{}x{} and {}", ht.nrows(), ht.ncols(), dt.len())));
        }
        let h = top_factor(&hh_step_raw(&self.s_tilde, ht, dt)?, self.k - self.pattern.n2);
        let ht_next = &h * h.transpose();
        let dt_next = residual_diagonal(&self.s_tilde, &ht_next);
        Ok((ht_next, dt_next))
    }

    /// Full-size `(HH, D)` with the constant border blocks `S12`, `S22` and `D2 = 0`.
    pub fn reassemble(&self, ht: &DMatrix<f64>, dt: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let hh = crate::kernel::assemble_symmetric(&(ht + &self.border), &self.s12, &self.s22);
        let mut d = DVector::zeros(self.pattern.n1 + self.pattern.n2);
        d.rows_mut(0, self.pattern.n1).copy_from(dt);
        (hh, d)
    }

    /// Loadings in the reduced form `[[H11, S12 R^{-1}], [0, R]]` with `R = S22^{1/2}`
    /// and `H11 H11^T = ht` (rank at most `k - n2`).
    pub fn factor(&self, ht: &DMatrix<f64>, dt: &DVector<f64>) -> Result<FactorParams> {
        let (n1, n2, k) = (self.pattern.n1, self.pattern.n2, self.k);
        let free = k - n2;
        let r = crate::kernel::psd_sqrt(&self.s22)?;
        let r_inv = spd_inverse(&r, "S22^{1/2}")?;
        let h11 = top_factor(ht, free);
        let mut h = DMatrix::zeros(n1 + n2, k);
        h.view_mut((0, 0), (n1, free)).copy_from(&h11);
        h.view_mut((0, free), (n1, n2)).copy_from(&(&self.s12 * r_inv));
        h.view_mut((n1, free), (n2, n2)).copy_from(&r);
        let (_, d) = self.reassemble(ht, dt);
        FactorParams::new(h, d)
    }
}

/// `I - H2^T (H2 H2^T)^{-1} H2`; `H2` must have full row rank.
pub fn complement_projection(h2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram_inv = spd_inverse(&(h2 * h2.transpose()), "H2 H2^T")
        .map_err(|_| FaError::Structure("H2 must have full row rank".into()))?;
    let k = h2.ncols();
    Ok(symmetrize(&(DMatrix::identity(k, k) - h2.transpose() * gram_inv * h2)))
}

/// An `n x r` factor `F` with `F F^T` the best rank-`r` PSD approximation of `m`.
pub(crate) fn top_factor(m: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let n = m.nrows();
    if r == 0 {
        return DMatrix::zeros(n, 0);
    }
    let eig = nalgebra::SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut f = DMatrix::zeros(n, r);
    for (j, &idx) in order.iter().take(r).enumerate() {
        let s = eig.eigenvalues[idx].max(0.0).sqrt();
        f.set_column(j, &(eig.eigenvectors.column(idx) * s));
    }
    f
}

/// One step of the reduced recursion for the `D2 = 0` problem, on the
/// `n1 x n1` iterates `(HH~, D~)`.
pub fn singular_step(
    sigma_hat: &CovMatrix,
    ht: &DMatrix<f64>,
    dt: &DVector<f64>,
    pattern: SingularPattern,
    k: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    SingularProblem::new(sigma_hat, pattern, k)?.step(ht, dt)
}
