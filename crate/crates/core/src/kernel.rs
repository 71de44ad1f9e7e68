//! Dense symmetric / positive-semidefinite matrix primitives.
//!
//! Everything downstream (divergences, the two lifted projections and the
//! iterative engines) is written on top of the handful of routines here:
//! the diagonal operator, symmetric PSD roots, guarded inverses and the
//! 2x2 block identities (block inverse, Woodbury, Schur complement).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{dim_err, singular, FaError, Result};

/// Relative asymmetry accepted when building a [`CovMatrix`].
pub const SYMMETRY_TOL: f64 = 1e-8;
/// Eigenvalues down to `-PSD_TOL * lambda_max` are accepted as PSD.
pub const PSD_TOL: f64 = 1e-10;
/// Inversions whose condition estimate exceeds this are refused.
pub const MAX_CONDITION: f64 = 1e14;

/// A symmetric matrix, validated at construction and stored exactly symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    entries: DMatrix<f64>,
    symmetry_tol: f64,
    psd: bool,
}

impl CovMatrix {
    /// Validates symmetry (relative tolerance [`SYMMETRY_TOL`]) and stores `(M + M^T) / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(m, SYMMETRY_TOL)
    }

    pub fn with_tolerance(m: DMatrix<f64>, symmetry_tol: f64) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(dim_err("CovMatrix", "non-empty square matrix", shape(&m)));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(FaError::Structure("matrix has non-finite entries".into()));
        }
        let asym = relative_asymmetry(&m);
        if asym > symmetry_tol {
            return Err(FaError::NotSymmetric { asymmetry: asym });
        }
        Ok(Self {
            entries: symmetrize(&m),
            symmetry_tol,
            psd: false,
        })
    }

    /// Like [`CovMatrix::new`] but additionally asserts positive semidefiniteness.
    pub fn new_psd(m: DMatrix<f64>) -> Result<Self> {
        let mut c = Self::new(m)?;
        check_psd(&c.entries)?;
        c.psd = true;
        Ok(c)
    }

    /// Like [`CovMatrix::new`] but requires a successful Cholesky factorization.
    pub fn new_pd(m: DMatrix<f64>) -> Result<Self> {
        let mut c = Self::new(m)?;
        if !c.is_positive_definite() {
            return Err(FaError::NotPd {
                min_eigenvalue: c.eigenvalues().min(),
            });
        }
        c.psd = true;
        Ok(c)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: DMatrix::identity(n, n),
            symmetry_tol: SYMMETRY_TOL,
            psd: true,
        }
    }

    pub fn from_diagonal(d: &DVector<f64>) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(d))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn symmetry_tol(&self) -> f64 {
        self.symmetry_tol
    }

    /// True when PSD-ness was checked at construction.
    pub fn psd_asserted(&self) -> bool {
        self.psd
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> DVector<f64> {
        sym_eigenvalues(&self.entries)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.entries.clone().cholesky().is_some()
    }

    /// Returns the blocks `(S11, S12, S22)` for the given partition.
    pub fn blocks(&self, split: BlockSplit) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        split.check(self.dim())?;
        Ok(split_blocks(&self.entries, split))
    }
}

impl AsRef<DMatrix<f64>> for CovMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// Partition of a square matrix into an `n1 x n1` upper-left and `n2 x n2` lower-right block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSplit {
    pub n1: usize,
    pub n2: usize,
}

impl BlockSplit {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 {
            return Err(FaError::Structure("block split requires n1 >= 1".into()));
        }
        Ok(Self { n1, n2 })
    }

    /// Split of a `dim`-sized matrix with a trailing block of size `n2`.
    pub fn trailing(dim: usize, n2: usize) -> Result<Self> {
        if n2 >= dim {
            return Err(FaError::Structure(format!(
                "trailing block {n2} leaves no leading block in dimension {dim}"
            )));
        }
        Self::new(dim - n2, n2)
    }

    pub fn dim(&self) -> usize {
        self.n1 + self.n2
    }

    pub(crate) fn check(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(dim_err("block split", dim, self.dim()));
        }
        Ok(())
    }
}

pub(crate) fn shape(m: &DMatrix<f64>) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

pub(crate) fn split_blocks(
    m: &DMatrix<f64>,
    split: BlockSplit,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (n1, n2) = (split.n1, split.n2);
    (
        m.view((0, 0), (n1, n1)).into_owned(),
        m.view((0, n1), (n1, n2)).into_owned(),
        m.view((n1, n1), (n2, n2)).into_owned(),
    )
}

/// Assembles `[[a, b], [b^T, c]]`.
pub(crate) fn assemble_symmetric(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let (n1, n2) = (a.nrows(), c.nrows());
    let mut m = DMatrix::zeros(n1 + n2, n1 + n2);
    m.view_mut((0, 0), (n1, n1)).copy_from(a);
    m.view_mut((0, n1), (n1, n2)).copy_from(b);
    m.view_mut((n1, 0), (n2, n1)).copy_from(&b.transpose());
    m.view_mut((n1, n1), (n2, n2)).copy_from(c);
    m
}

fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / scale
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let mut ev: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    DVector::from_vec(ev)
}

fn check_psd(m: &DMatrix<f64>) -> Result<()> {
    let ev = sym_eigenvalues(m);
    let (lo, hi) = (ev.min(), ev.max());
    if lo < -PSD_TOL * hi.max(0.0) || (hi <= 0.0 && lo < 0.0) {
        return Err(FaError::NotPsd { min_eigenvalue: lo });
    }
    Ok(())
}

/// The diagonal operator: keeps the diagonal of `m` and zeroes the rest.
pub fn delta(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(dim_err("delta", "square matrix", shape(m)));
    }
    Ok(DMatrix::from_diagonal(&m.diagonal()))
}

/// Unique symmetric PSD root `S` of a symmetric PSD matrix, so that `S^T S = S S = P`.
pub fn psd_sqrt(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    root_with(p, |l| l.sqrt(), false)
}

/// Inverse of the symmetric PSD root, `P^{-1/2}`. Requires `P` positive definite.
pub fn psd_inv_sqrt(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    root_with(p, |l| 1.0 / l.sqrt(), true)
}

fn root_with(p: &DMatrix<f64>, f: impl Fn(f64) -> f64, strict: bool) -> Result<DMatrix<f64>> {
    if !p.is_square() {
        return Err(dim_err("psd root", "square matrix", shape(p)));
    }
    let asym = relative_asymmetry(p);
    if asym > SYMMETRY_TOL {
        return Err(FaError::NotSymmetric { asymmetry: asym });
    }
    let eig = SymmetricEigen::new(symmetrize(p));
    let hi = eig.eigenvalues.max().max(0.0);
    let lo = eig.eigenvalues.min();
    if lo < -PSD_TOL * hi || (hi == 0.0 && lo < 0.0) {
        return Err(FaError::NotPsd { min_eigenvalue: lo });
    }
    if strict && (lo <= 0.0 || hi / lo > MAX_CONDITION) {
        if lo <= 0.0 {
            return Err(FaError::NotPd { min_eigenvalue: lo });
        }
        return Err(FaError::IllConditioned {
            block: "inverse square root argument".into(),
            condition: hi / lo,
        });
    }
    let vals = eig.eigenvalues.map(|l| f(l.max(0.0)));
    let v = &eig.eigenvectors;
    Ok(symmetrize(&(v * DMatrix::from_diagonal(&vals) * v.transpose())))
}

/// Maximum absolute column sum.
pub(crate) fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn guard_condition(m: &DMatrix<f64>, inv: &DMatrix<f64>, what: &str) -> Result<()> {
    let cond = norm1(m) * norm1(inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(FaError::IllConditioned {
            block: what.to_string(),
            condition: cond,
        });
    }
    Ok(())
}

/// Inverse of a symmetric positive definite matrix via Cholesky, with a condition guard.
pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(dim_err("spd inverse", "square matrix", shape(m)));
    }
    if m.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let chol = symmetrize(m).cholesky().ok_or_else(|| singular(what))?;
    let inv = symmetrize(&chol.inverse());
    guard_condition(m, &inv, what)?;
    Ok(inv)
}

/// Inverse of a general square matrix via LU, with a condition guard.
pub fn inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(dim_err("inverse", "square matrix", shape(m)));
    }
    if m.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let inv = m.clone().try_inverse().ok_or_else(|| singular(what))?;
    guard_condition(m, &inv, what)?;
    Ok(inv)
}

/// Log-determinant from a Cholesky factor; `None` when `m` is not positive definite.
pub fn log_det_spd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = symmetrize(m).cholesky()?;
    Some(2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>())
}

/// Inverse of `M = [[A, C], [B, D]]` assembled blockwise from `D^{-1}` and the
/// Schur complement `A - C D^{-1} B`.
pub fn block_inverse(m: &DMatrix<f64>, split: BlockSplit) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(dim_err("block_inverse", "square matrix", shape(m)));
    }
    split.check(m.nrows())?;
    let (n1, n2) = (split.n1, split.n2);
    if n2 == 0 {
        return inverse(m, "upper-left block A");
    }
    let a = m.view((0, 0), (n1, n1)).into_owned();
    let c = m.view((0, n1), (n1, n2)).into_owned();
    let b = m.view((n1, 0), (n2, n1)).into_owned();
    let d = m.view((n1, n1), (n2, n2)).into_owned();

    let d_inv = inverse(&d, "lower-right block D")?;
    let schur = &a - &c * &d_inv * &b;
    let s_inv = inverse(&schur, "Schur complement A - C D^-1 B")?;

    let upper_right = -(&s_inv * &c * &d_inv);
    let lower_left = -(&d_inv * &b * &s_inv);
    let lower_right = &d_inv + &d_inv * &b * &s_inv * &c * &d_inv;

    let mut out = DMatrix::zeros(n1 + n2, n1 + n2);
    out.view_mut((0, 0), (n1, n1)).copy_from(&s_inv);
    out.view_mut((0, n1), (n1, n2)).copy_from(&upper_right);
    out.view_mut((n1, 0), (n2, n1)).copy_from(&lower_left);
    out.view_mut((n1, n1), (n2, n2)).copy_from(&lower_right);
    Ok(out)
}

/// `(D - B A C)^{-1} = D^{-1} + D^{-1} B (A^{-1} - C D^{-1} B)^{-1} C D^{-1}`.
///
/// Only `D` and matrices of the inner dimension are inverted.
pub fn woodbury_inverse(
    d: &DMatrix<f64>,
    b: &DMatrix<f64>,
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = d.nrows();
    let m = a.nrows();
    if !d.is_square() || !a.is_square() {
        return Err(dim_err("woodbury_inverse", "square D and A", format!("{} and {}", shape(d), shape(a))));
    }
    if b.shape() != (n, m) || c.shape() != (m, n) {
        return Err(dim_err(
            "woodbury_inverse",
            format!("B {n}x{m}, C {m}x{n}"),
            format!("B {}, C {}", shape(b), shape(c)),
        ));
    }
    let d_inv = inverse(d, "D")?;
    let a_inv = inverse(a, "A")?;
    let inner = &a_inv - c * &d_inv * b;
    let inner_inv = inverse(&inner, "inner matrix A^-1 - C D^-1 B")?;
    Ok(&d_inv + &d_inv * b * inner_inv * c * &d_inv)
}

pub(crate) fn schur_raw(m: &DMatrix<f64>, split: BlockSplit) -> Result<DMatrix<f64>> {
    let (s11, s12, s22) = split_blocks(m, split);
    if split.n2 == 0 {
        return Ok(s11);
    }
    let s22_inv = spd_inverse(&s22, "lower-right block")?;
    Ok(symmetrize(&(&s11 - &s12 * s22_inv * s12.transpose())))
}

/// `S11 - S12 S22^{-1} S21`, the conditional covariance of the leading block.
pub fn schur_complement(m: &CovMatrix, split: BlockSplit) -> Result<CovMatrix> {
    split.check(m.dim())?;
    CovMatrix::new(schur_raw(m.matrix(), split)?)
}

/// Frobenius norm of `a - b`.
pub fn l2_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(dim_err("l2_diff", shape(a), shape(b)));
    }
    Ok((a - b).norm())
}

/// `Delta`-free part: `m - Delta(m)`.
pub(crate) fn offdiag(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    out.fill_diagonal(0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn delta_keeps_diagonal() {
        assert_eq!(delta(&dmatrix![1.0, 2.0; 3.0, 4.0]).unwrap(), dmatrix![1.0, 0.0; 0.0, 4.0]);
        assert_eq!(delta(&DMatrix::identity(3, 3)).unwrap(), DMatrix::identity(3, 3));
        assert_eq!(delta(&dmatrix![2.0, 1.0; 1.0, 1.0]).unwrap(), dmatrix![2.0, 0.0; 0.0, 1.0]);
        assert!(matches!(
            delta(&DMatrix::zeros(2, 3)),
            Err(FaError::Dimension { .. })
        ));
    }

    #[test]
    fn psd_sqrt_cases() {
        let s = psd_sqrt(&dmatrix![4.0, 0.0; 0.0, 9.0]).unwrap();
        assert_relative_eq!(s, dmatrix![2.0, 0.0; 0.0, 3.0], epsilon = 1e-14);
        let s = psd_sqrt(&DMatrix::identity(3, 3)).unwrap();
        assert_relative_eq!(s, DMatrix::identity(3, 3), epsilon = 1e-14);

        // eigen oracle: [[2,1],[1,2]] = V diag(3,1) V^T, V = [1 1; 1 -1]/sqrt2
        let p = dmatrix![2.0, 1.0; 1.0, 2.0];
        let s = psd_sqrt(&p).unwrap();
        let (a, b) = (3f64.sqrt(), 1.0);
        let expected = dmatrix![(a + b) / 2.0, (a - b) / 2.0; (a - b) / 2.0, (a + b) / 2.0];
        assert_relative_eq!(s, expected, epsilon = 1e-14);
        assert_eq!(s, s.transpose());
        assert!((s.transpose() * &s - &p).norm() <= 1e-10 * p.norm());
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        match psd_sqrt(&dmatrix![1.0, 2.0; 2.0, 1.0]) {
            Err(FaError::NotPsd { min_eigenvalue }) => assert_relative_eq!(min_eigenvalue, -1.0, epsilon = 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn block_inverse_cases() {
        for split in [BlockSplit::new(1, 2).unwrap(), BlockSplit::new(2, 1).unwrap(), BlockSplit::new(3, 0).unwrap()] {
            assert_relative_eq!(block_inverse(&DMatrix::identity(3, 3), split).unwrap(), DMatrix::identity(3, 3));
        }
        let s = BlockSplit::new(1, 1).unwrap();
        assert_relative_eq!(
            block_inverse(&dmatrix![2.0, 0.0; 0.0, 4.0], s).unwrap(),
            dmatrix![0.5, 0.0; 0.0, 0.25]
        );
        // 2x2 adjugate oracle: det = 1
        assert_relative_eq!(
            block_inverse(&dmatrix![2.0, 1.0; 1.0, 1.0], s).unwrap(),
            dmatrix![1.0, -1.0; -1.0, 2.0],
            epsilon = 1e-14
        );
    }

    #[test]
    fn block_inverse_names_singular_block() {
        let s = BlockSplit::new(1, 1).unwrap();
        let err = block_inverse(&dmatrix![1.0, 1.0; 1.0, 0.0], s).unwrap_err();
        assert!(err.to_string().contains("lower-right block D"), "{err}");
        let err = block_inverse(&dmatrix![1.0, 1.0; 1.0, 1.0], s).unwrap_err();
        assert!(err.to_string().contains("Schur complement"), "{err}");
    }

    #[test]
    fn woodbury_cases() {
        let out = woodbury_inverse(
            &DMatrix::identity(2, 2),
            &DMatrix::zeros(2, 1),
            &dmatrix![3.0],
            &dmatrix![5.0, 7.0],
        )
        .unwrap();
        assert_relative_eq!(out, DMatrix::identity(2, 2));

        let out = woodbury_inverse(&dmatrix![2.0], &dmatrix![1.0], &dmatrix![1.0], &dmatrix![1.0]).unwrap();
        assert_relative_eq!(out[(0, 0)], 1.0, epsilon = 1e-15);

        let d = dmatrix![1.0, 0.0; 0.0, 2.0];
        let b = dmatrix![1.0; 1.0];
        let c = dmatrix![1.0, 1.0];
        let out = woodbury_inverse(&d, &b, &dmatrix![-1.0], &c).unwrap();
        // direct oracle: D + B B^T = [[2,1],[1,3]], inverse = [[3,-1],[-1,2]]/5
        let expected = dmatrix![3.0, -1.0; -1.0, 2.0] / 5.0;
        assert_relative_eq!(out, expected, epsilon = 1e-14);
    }

    #[test]
    fn woodbury_singular_inner() {
        // A^-1 - C D^-1 B = 1 - 1 = 0
        let err = woodbury_inverse(&dmatrix![1.0], &dmatrix![1.0], &dmatrix![1.0], &dmatrix![1.0]).unwrap_err();
        assert!(matches!(err, FaError::Singular { .. } | FaError::IllConditioned { .. }), "{err}");
    }

    #[test]
    fn schur_cases() {
        let m = CovMatrix::new(dmatrix![2.0, 1.0; 1.0, 1.0]).unwrap();
        let s = schur_complement(&m, BlockSplit::new(1, 1).unwrap()).unwrap();
        assert_relative_eq!(s.matrix()[(0, 0)], 1.0, epsilon = 1e-15);

        let m = CovMatrix::new(dmatrix![3.0, 1.0, 0.0; 1.0, 2.0, 0.0; 0.0, 0.0, 5.0]).unwrap();
        let s = schur_complement(&m, BlockSplit::new(2, 1).unwrap()).unwrap();
        assert_eq!(s.matrix(), &dmatrix![3.0, 1.0; 1.0, 2.0]);

        let s = schur_complement(&CovMatrix::identity(4), BlockSplit::new(3, 1).unwrap()).unwrap();
        assert_eq!(s.matrix(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn schur_singular_lower_block() {
        let m = CovMatrix::new(dmatrix![1.0, 0.0; 0.0, 0.0]).unwrap();
        assert!(schur_complement(&m, BlockSplit::new(1, 1).unwrap()).is_err());
    }

    #[test]
    fn l2_diff_cases() {
        let a = dmatrix![2.0, 1.0; 1.0, 1.0];
        assert_eq!(l2_diff(&a, &a).unwrap(), 0.0);
        assert_relative_eq!(
            l2_diff(&DMatrix::identity(2, 2), &DMatrix::zeros(2, 2)).unwrap(),
            2f64.sqrt()
        );
        assert_relative_eq!(l2_diff(&a, &dmatrix![1.0, 1.0; 1.0, 1.0]).unwrap(), 1.0);
        assert!(l2_diff(&a, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn construction_validates_symmetry() {
        assert!(matches!(
            CovMatrix::new(dmatrix![1.0, 2.0; 0.0, 1.0]),
            Err(FaError::NotSymmetric { .. })
        ));
        let c = CovMatrix::new(dmatrix![1.0, 0.5 + 1e-12; 0.5, 1.0]).unwrap();
        assert_eq!(c.matrix()[(0, 1)], c.matrix()[(1, 0)]);
        assert!(CovMatrix::new_psd(dmatrix![1.0, 2.0; 2.0, 1.0]).is_err());
        assert!(CovMatrix::new_psd(dmatrix![1.0, 1.0; 1.0, 1.0]).unwrap().psd_asserted());
        assert!(CovMatrix::new_pd(dmatrix![1.0, 1.0; 1.0, 1.0]).is_err());
    }

    #[test]
    fn ill_conditioned_inverse_is_refused() {
        let m = dmatrix![1.0, 0.0; 0.0, 1e-15];
        assert!(matches!(spd_inverse(&m, "test"), Err(FaError::IllConditioned { .. })));
    }
}
