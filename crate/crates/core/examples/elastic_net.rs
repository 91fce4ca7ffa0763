//! Elastic-net fitting: a sparse ground truth, the regularization path, and
//! cross-validated hyperparameters.
//!
//! ```bash
//! cargo run --example elastic_net
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soh_adapt::enr::{fit, fit_cv, fit_with, FitOptions};

fn main() -> soh_adapt::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let truth = [3.0, 0.0, -2.0, 0.0, 0.0, 0.5];
    let x: Vec<Vec<f64>> = (0..120)
        .map(|_| (0..truth.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| 10.0 + r.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + 0.05 * rng.random_range(-1.0..1.0))
        .collect();

    println!("lambda    nonzero  coefficients (original units)");
    for lambda in [0.0, 0.01, 0.1, 0.5, 1.0] {
        let m = fit(&x, &y, lambda, 1.0)?;
        let (coef, _) = m.coefficients_original();
        let nz = coef.iter().filter(|c| c.abs() > 1e-12).count();
        println!("{lambda:<9} {nz:<8} {coef:.3?}");
    }

    let (m, trace) = fit_with(&x, &y, 0.05, 0.5, &FitOptions::default())?;
    println!("lambda 0.05, mix 0.5: {} sweeps, objective {:.6} -> {:.6}", trace.sweeps(), trace.objective[0], trace.objective[trace.objective.len() - 1]);

    let cv = fit_cv(&x, &y, &[0.001, 0.01, 0.1, 1.0], &[0.1, 0.5, 1.0], 5)?;
    println!("cross-validated choice: lambda {} mix {}", cv.lambda_reg, cv.mix);
    println!("prediction at the origin {:.4} (true 10)", cv.predict_row(&[0.0; 6])?);
    println!("serialized model:\n{}", m.to_text());
    Ok(())
}
