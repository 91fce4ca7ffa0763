//! Generates a seeded fleet, writes it as CSV, and ingests it back.
//!
//! ```bash
//! cargo run --example synth_fleet -- /tmp/fleet
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use soh_adapt::io::{ingest, telemetry_file_name, write_telemetry, write_truth, TruthRow};
use soh_adapt::synth::{generate, FleetSpec};

fn main() -> soh_adapt::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("soh_fleet"));
    std::fs::create_dir_all(&dir)?;

    let spec = FleetSpec {
        seed: 42,
        ..FleetSpec::default()
    };
    let fleet = generate(&spec)?;
    let mut truth = Vec::new();
    for c in &fleet.cells {
        let f = BufWriter::new(File::create(dir.join(telemetry_file_name(&c.cell_id)))?);
        write_telemetry(&c.cell_id, &c.samples, f)?;
        let peak = c.capacity.values().iter().cloned().fold(f64::MIN, f64::max);
        println!(
            "cell {} group {} q0 {:.3} Ah  peak {:.3} Ah  {} samples",
            c.cell_id,
            c.group + 1,
            c.q0,
            peak,
            c.samples.len()
        );
        truth.extend(c.capacity.iter().map(|(ah, q)| TruthRow {
            cell_id: c.cell_id.clone(),
            ah,
            q_true: q,
            group_label: c.group + 1,
        }));
    }
    write_truth(&truth, File::create(dir.join("ground_truth.csv"))?)?;

    let streams = ingest(&dir)?;
    let identical = fleet.cells.iter().all(|c| streams[&c.cell_id] == c.samples);
    println!("wrote {}; re-ingested {} streams, identical: {identical}", dir.display(), streams.len());
    Ok(())
}
