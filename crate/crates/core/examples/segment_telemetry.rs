//! Splits a generated cell stream into cycles and extracts feature vectors.
//!
//! ```bash
//! cargo run --example segment_telemetry
//! ```

use soh_adapt::features::{
    build_feature_vector_with, cycle_q_age, cycle_q_c20, segment_cycles, CycleType, FeatureSchema,
    SegmentationConfig,
};
use soh_adapt::synth::{generate, FleetSpec};

fn main() -> soh_adapt::Result<()> {
    let spec = FleetSpec {
        n_cells: 2,
        n_groups: 1,
        cycles_per_cell: 12,
        rpt_interval: 5,
        ..FleetSpec::default()
    };
    let fleet = generate(&spec)?;
    let cell = &fleet.cells[0];
    let cycles = segment_cycles(&cell.cell_id, &cell.samples, &SegmentationConfig::default())?;
    println!("cell {}: {} samples, {} cycles", cell.cell_id, cell.samples.len(), cycles.len());

    let schema = FeatureSchema::default();
    println!("features: {}", schema.names().join(", "));
    let mut prev = None;
    for c in &cycles {
        match c.cycle_type {
            CycleType::C20Capacity => {
                println!("#{:>3} {:<12} Ah {:>8.2}  Q_c20 {:.4}", c.cycle_index, c.cycle_type, c.ah_at_charge, cycle_q_c20(c)?)
            }
            CycleType::Aging => {
                let fv = build_feature_vector_with(&schema, c, prev)?;
                println!(
                    "#{:>3} {:<12} Ah {:>8.2}  Q_age {:.4}  x = {:.3?}",
                    c.cycle_index,
                    c.cycle_type,
                    c.ah_at_charge,
                    cycle_q_age(c)?,
                    &fv.entries[..5]
                );
                prev = Some(c);
            }
            _ => println!("#{:>3} {:<12} Ah {:>8.2}", c.cycle_index, c.cycle_type, c.ah_at_charge),
        }
    }
    Ok(())
}
