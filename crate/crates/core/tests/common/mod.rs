#![allow(dead_code)]

use factor_idiv::{CovMatrix, FactorParams};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Well-conditioned SPD matrix.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let b = uniform(rng, n, n, -1.0, 1.0);
    let mut m = &b * b.transpose() / n as f64;
    for i in 0..n {
        m[(i, i)] += rng.random_range(0.3..1.3);
    }
    (m.clone() + m.transpose()) * 0.5
}

pub fn random_cov(rng: &mut ChaCha8Rng, n: usize) -> CovMatrix {
    CovMatrix::new(random_spd(rng, n)).unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng, n: usize, k: usize) -> FactorParams {
    let h = uniform(rng, n, k, -1.0, 1.0);
    let d = DVector::from_fn(n, |_, _| rng.random_range(0.2..1.2));
    FactorParams::new(h, d).unwrap()
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / (1.0 + b.norm())
}

pub fn vec_rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / (1.0 + b.norm())
}

// Oracles below use LU determinants, plain inverses and an eigen-based root,
// independently of the library's own kernels.

pub fn inv(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("oracle inverse")
}

pub fn sqrt_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(m.clone());
    let s = DMatrix::from_diagonal(&e.eigenvalues.map(|x| x.max(0.0).sqrt()));
    &e.eigenvectors * s * e.eigenvectors.transpose()
}

pub fn idiv(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let m = a.nrows() as f64;
    0.5 * (b.determinant().ln() - a.determinant().ln() - m + (inv(b) * a).trace())
}

pub fn model(h: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    h * h.transpose() + DMatrix::from_diagonal(d)
}

/// Alternating step written as the two lifted projections with `Q_t = I`.
pub fn oracle_alt_step(sh: &DMatrix<f64>, h: &DMatrix<f64>, d: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let k = h.ncols();
    let s11 = model(h, d);
    let s11_inv = inv(&s11);
    // first projection of [[S11, H], [H^T, I]]
    let t = &s11_inv * h;
    let s12 = sh * &t;
    let s22 = DMatrix::identity(k, k) - t.transpose() * (&s11 - sh) * &t;
    // second projection
    let root_inv = inv(&sqrt_sym(&s22));
    let h_new = &s12 * root_inv;
    let d_new = (sh - &s12 * inv(&s22) * s12.transpose()).diagonal();
    (h_new, d_new)
}

/// Textbook EM for factor analysis.
pub fn oracle_em_step(sh: &DMatrix<f64>, h: &DMatrix<f64>, d: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let k = h.ncols();
    let beta = h.transpose() * inv(&model(h, d));
    let czz = DMatrix::identity(k, k) - &beta * h + &beta * sh * beta.transpose();
    let h_new = sh * beta.transpose() * inv(&czz);
    let d_new = (sh - &h_new * &beta * sh).diagonal();
    (h_new, d_new)
}

/// `S11 - S12 S22^{-1} S21` for the trailing split.
pub fn oracle_schur(m: &DMatrix<f64>, n1: usize) -> DMatrix<f64> {
    let n2 = m.nrows() - n1;
    let a = m.view((0, 0), (n1, n1));
    let b = m.view((0, n1), (n1, n2));
    let c = m.view((n1, n1), (n2, n2));
    a - b * inv(&c.into_owned()) * b.transpose()
}
