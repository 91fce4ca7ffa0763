//! Leave-one-out comparison of the fused and regression-only estimators on
//! the default synthetic fleet.
//!
//! ```bash
//! cargo run --release --example leave_one_out
//! ```

use soh_adapt::harness::{leave_one_out, Dataset, RunConfig};
use soh_adapt::synth::{generate, FleetSpec};

fn main() -> soh_adapt::Result<()> {
    let cfg = RunConfig::default();
    let fleet = generate(&FleetSpec::default())?;
    let data = Dataset::from_fleet(&fleet, &cfg.segmentation, &cfg.schema)?;
    let table = leave_one_out(&data, &cfg)?;

    println!("{:<6} {:>12} {:>12}", "cell", "adaptive %", "ENR %");
    for r in &table.rows {
        println!("{:<6} {:>12.4} {:>12.4}", r.cell_id, r.adaptive.rmspe, r.enr.rmspe);
    }
    println!("{:<6} {:>12.4} {:>12.4}", "mean", table.mean_adaptive, table.mean_enr);
    Ok(())
}
