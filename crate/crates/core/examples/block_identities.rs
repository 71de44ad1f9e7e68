//! Block inverse, Woodbury and Schur complement against dense inversion.

use factor_idiv::kernel::{block_inverse, schur_complement, woodbury_inverse};
use factor_idiv::{generate_sigma, BlockSplit, GeneratorSpec};
use nalgebra::DMatrix;

fn main() -> factor_idiv::Result<()> {
    let m = generate_sigma(&GeneratorSpec { n: 7, m: 3, c: 1.0, seed: 8 })?.sigma;
    let dense = m.matrix().clone().try_inverse().expect("invertible");
    let split = BlockSplit::new(4, 3)?;

    let bi = block_inverse(m.matrix(), split)?;
    println!("block inverse: {:.2e}", (&bi - &dense).norm() / dense.norm());

    // the inverse of the Schur complement is the leading block of the inverse
    let s = schur_complement(&m, split)?;
    let s_inv = s.matrix().clone().try_inverse().expect("invertible");
    println!("Schur complement: {:.2e}", (s_inv - dense.view((0, 0), (4, 4))).norm() / dense.norm());

    // (D - B A C)^{-1} with D diagonal and a rank-2 update
    let d = DMatrix::from_diagonal(&nalgebra::dvector![2.0, 3.0, 1.5, 4.0, 2.5]);
    let b = DMatrix::from_fn(5, 2, |i, j| 0.1 * (i + 2 * j) as f64);
    let a = DMatrix::from_diagonal(&nalgebra::dvector![-1.0, -0.5]);
    let w = woodbury_inverse(&d, &b, &a, &b.transpose())?;
    let direct = (&d - &b * &a * b.transpose()).try_inverse().expect("invertible");
    println!("Woodbury: {:.2e}", (w - &direct).norm() / direct.norm());
    Ok(())
}
