//! Fused online estimation for one held-out cell, step by step.
//!
//! ```bash
//! cargo run --release --example online_fusion
//! ```

use soh_adapt::harness::{prepare_fold, run_session, Dataset, RunConfig};
use soh_adapt::synth::{generate, FleetSpec};

fn main() -> soh_adapt::Result<()> {
    let cfg = RunConfig::default();
    let fleet = generate(&FleetSpec::default())?;
    let data = Dataset::from_fleet(&fleet, &cfg.segmentation, &cfg.schema)?;
    let z = data.index_of("2.3")?;
    let fold = prepare_fold(&data, z, &cfg)?;
    let fusion = fold.fusion_config(&cfg)?;
    println!("alpha {:.3e} per Ah (ah_max {:.0})", fusion.learn_alpha, fusion.ah_max);

    let cell = &data.cells[z];
    let session = run_session(&fold, cell, &data.schema, fusion)?;
    let ids: Vec<&str> = fold.training.cells().iter().map(|c| c.cell_id.as_str()).collect();
    println!("{:>8} {:>8} {:>8} {:>8} {:>6} {:>8} {:>8}", "Ah", "Q_rg", "Q_ct", "Q_hat", "w2", "nearest", "truth");
    for e in session.log().iter().step_by(20) {
        let truth = cell.capacity.value_at(e.ah).map_or(String::from("-"), |q| format!("{q:.3}"));
        println!(
            "{:>8.1} {:>8.3} {:>8.3} {:>8.3} {:>6.3} {:>8} {:>8}",
            e.ah, e.q_rg, e.q_ct, e.q_hat, e.w2, ids[e.s_n], truth
        );
    }
    Ok(())
}
