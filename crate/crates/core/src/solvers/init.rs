use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FaError, Result};
use crate::kernel::{spd_inverse, sym_eigenvalues, CovMatrix};
use crate::params::FactorParams;

/// Largest eigenvalue allowed for `H0^T sigma_hat^{-1} H0`, which keeps `H0 H0^T` below `sigma_hat / 2`.
const INIT_LOADING_SCALE: f64 = 0.45;

/// Seeded starting point: random loadings scaled so that `H0 H0^T <= sigma_hat / 2`
/// and `D0 = Delta(sigma_hat) / 2`.
///
/// Entries of the unscaled loadings are uniform on `[-1, 1)` from a `ChaCha8` stream.
pub fn default_init(sigma_hat: &CovMatrix, k: usize, seed: u64) -> Result<FactorParams> {
    let n = sigma_hat.dim();
    if k == 0 || k >= n {
        return Err(FaError::InvalidConfig(format!("need 1 <= k < n, got k = {k}, n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
    let s_inv = spd_inverse(sigma_hat.matrix(), "sigma_hat")?;
    let top = sym_eigenvalues(&(h.transpose() * s_inv * &h)).max();
    if top > 0.0 {
        h *= (INIT_LOADING_SCALE / top).sqrt();
    }
    let d = DVector::from_fn(n, |i, _| 0.5 * sigma_hat.matrix()[(i, i)]);
    FactorParams::new(h, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::sym_eigenvalues;
    use nalgebra::dmatrix;

    fn target() -> CovMatrix {
        CovMatrix::new(dmatrix![2.0, 0.3, 0.1, 0.0; 0.3, 1.0, 0.2, 0.1; 0.1, 0.2, 3.0, 0.4; 0.0, 0.1, 0.4, 1.5]).unwrap()
    }

    #[test]
    fn half_diagonal_and_bounded_loadings() {
        let s = target();
        let p = default_init(&s, 2, 11).unwrap();
        for i in 0..4 {
            assert_eq!(p.d()[i], 0.5 * s.matrix()[(i, i)]);
        }
        let gap = s.matrix() * 0.5 - p.hh();
        assert!(sym_eigenvalues(&gap).min() > 0.0);
        assert!(p.model().cholesky().is_some());
        assert!(sym_eigenvalues(&(p.h().transpose() * p.h())).min() > 0.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let s = target();
        assert_eq!(default_init(&s, 2, 5).unwrap(), default_init(&s, 2, 5).unwrap());
        assert_ne!(default_init(&s, 2, 5).unwrap(), default_init(&s, 2, 6).unwrap());
    }

    #[test]
    fn rejects_too_many_factors() {
        assert!(default_init(&target(), 4, 0).is_err());
        assert!(default_init(&target(), 0, 0).is_err());
    }
}
