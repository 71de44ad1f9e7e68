//! Build an exact factor model from a target whose leading Schur complement is diagonal.

use factor_idiv::{exact_fa_check, exact_fa_realization, objective, sigma_from_parts, BlockSplit};
use nalgebra::{dmatrix, dvector};

fn main() -> factor_idiv::Result<()> {
    // three factors, noise only on the first three coordinates
    let a = dmatrix![
        1.0, 0.2, 0.0;
        0.5, 1.0, 0.3;
        0.1, 0.4, 1.0;
        0.8, 0.0, 0.2;
        0.0, 0.6, 0.5;
        0.3, 0.3, 0.9
    ];
    let problem = sigma_from_parts(a, dvector![0.5, 0.7, 0.2, 0.0, 0.0, 0.0], 1.0)?;
    let split = BlockSplit::trailing(6, 3)?;
    let check = exact_fa_check(&problem.sigma, split)?;
    println!("exact: {}, off-diagonal Schur norm {:.2e}", check.exact, check.offdiag_norm);

    let params = exact_fa_realization(&problem.sigma, split, 3)?;
    println!("D = {:.4?}", params.d().as_slice());
    println!("divergence of the realization: {:.2e}", objective(&problem.sigma, &params)?.raw());
    Ok(())
}
