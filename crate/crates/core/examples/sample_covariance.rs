//! Simulate data from a factor model and fit its sample covariance.

use factor_idiv::{default_init, run, sample_covariance, Engine, SolverConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

fn main() -> factor_idiv::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (n, k, samples) = (6, 2, 5000);
    let h = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
    let sd = DVector::from_fn(n, |_, _| rng.random_range(0.3..0.8));
    let mut data = DMatrix::zeros(samples, n);
    for mut row in data.row_iter_mut() {
        let z = DVector::from_fn(k, |_, _| normal(&mut rng));
        let x = &h * z + DVector::from_fn(n, |i, _| sd[i] * normal(&mut rng));
        row.copy_from(&x.transpose());
    }
    let sigma_hat = sample_covariance(&data, true)?;
    let init = default_init(&sigma_hat, k, 0)?;
    let t = run(Engine::Alt, &sigma_hat, &init, &SolverConfig::default())?;
    println!("{} after {} iterations", t.termination, t.iterations);
    println!("true D   = {:.3?}", sd.map(|s| s * s).as_slice());
    println!("fitted D = {:.3?}", t.final_params.d().as_slice());
    println!(
        "||HH^T - H0 H0^T|| / ||H0 H0^T|| = {:.3}",
        (t.final_params.hh() - &h * h.transpose()).norm() / (&h * h.transpose()).norm()
    );
    Ok(())
}
