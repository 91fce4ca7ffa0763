//! Online classification of a monitored cell against training trajectories,
//! with Ah-weighted forgetting factors and the clustering estimate.
//!
//! ```bash
//! cargo run --example trajectory_clustering
//! ```

use soh_adapt::cluster::{classify_step, estimate_ct, ClassificationState, TrainingCell, TrainingSet};
use soh_adapt::trajectory::Trajectory;

fn cell(id: &str, level: f64, fade: f64) -> soh_adapt::Result<TrainingCell> {
    let ah: Vec<f64> = (0..=20).map(|i| i as f64 * 50.0).collect();
    Ok(TrainingCell {
        cell_id: id.into(),
        q_age: Trajectory::from_vecs(ah.clone(), ah.iter().map(|a| level - fade * a).collect())?,
        q_bar: Trajectory::from_vecs(ah.clone(), ah.iter().map(|a| 1.0 - fade * a / level).collect())?,
        q0: 30.0,
        features: Vec::new(),
    })
}

fn main() -> soh_adapt::Result<()> {
    let training = TrainingSet::new(vec![
        cell("A", 20.0, 0.001)?,
        cell("B", 21.0, 0.002)?,
        cell("C", 22.0, 0.001)?,
    ])?;
    let mut state = ClassificationState::new(training.len())?;

    // the monitored cell starts near C and drifts toward B
    for i in 0..12 {
        let ah = 30.0 + i as f64 * 80.0;
        let q_age = if i < 6 { 21.9 - 0.001 * ah } else { 21.0 - 0.002 * ah };
        let s = classify_step(&mut state, &training, q_age, ah)?;
        let q_ct = estimate_ct(&training, state.lambda(), 31.0, ah)?;
        println!(
            "Ah {ah:>6.1}  nearest {}  lambda {:.3?}  Q_ct {q_ct:.4}",
            training.cells()[s].cell_id,
            state.lambda()
        );
    }
    println!("distances {:.4?}", state.distances());
    println!("state snapshot:\n{}", state.to_text());
    Ok(())
}
