//! Trapezoidal coulomb counting over a hand-built current profile.
//!
//! ```bash
//! cargo run --example coulomb_counting
//! ```

use soh_adapt::trajectory::{accumulate_ah, cumulative_ah, integrate_charge, TimeSample};

fn main() -> soh_adapt::Result<()> {
    // 10 A charge for one hour with 1 s ramps, then a 10 A discharge
    let profile = [
        (0.0, 0.0),
        (1.0, 10.0),
        (3600.0, 10.0),
        (3601.0, 0.0),
        (3901.0, 0.0),
        (3902.0, -10.0),
        (7501.0, -10.0),
        (7502.0, 0.0),
    ];
    let samples: Vec<TimeSample> = profile
        .iter()
        .map(|&(t, i)| TimeSample::new(t, i, 3.7, 25.0))
        .collect();

    let charge = integrate_charge(&samples, 0.0, 3901.0)?;
    let discharge = integrate_charge(&samples, 3901.0, 7502.0)?;
    println!("charge    {charge:.6} Ah");
    println!("discharge {discharge:.6} Ah");

    // a window edge that falls between samples is interpolated
    println!("first half hour {:.6} Ah", integrate_charge(&samples, 0.0, 1800.0)?);

    println!("throughput at end {:.6} Ah", accumulate_ah(&samples, 7502.0)?);
    for (s, ah) in samples.iter().zip(cumulative_ah(&samples)?) {
        println!("  t = {:>6} s  I = {:>6} A  Ah = {ah:.4}", s.t, s.current);
    }
    Ok(())
}
