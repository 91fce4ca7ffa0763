//! Sensitivity of the fused estimate to the learning-rate constant.
//!
//! ```bash
//! cargo run --release --example alpha_sweep
//! ```

use soh_adapt::harness::{alpha_sweep, enr_only_rmse, Dataset, RunConfig};
use soh_adapt::synth::{generate, FleetSpec};

fn main() -> soh_adapt::Result<()> {
    let cfg = RunConfig::default();
    let fleet = generate(&FleetSpec::default())?;
    let data = Dataset::from_fleet(&fleet, &cfg.segmentation, &cfg.schema)?;

    let alphas: Vec<f64> = std::iter::once(0.0)
        .chain((0..9).map(|i| 1e-6 * 10f64.powf(i as f64 * 0.5)))
        .collect();
    let points = alpha_sweep(&data, "2.3", &alphas, &cfg)?;
    for (a, rmse) in &points {
        println!("alpha {a:>9.2e}  RMSE {rmse:.5} Ah");
    }
    println!("regression only    RMSE {:.5} Ah", enr_only_rmse(&data, "2.3", &cfg)?);
    Ok(())
}
