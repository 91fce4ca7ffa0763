//! Online adaptive state-of-health estimation for second-life battery cells.
//!
//! The estimator fuses two sources:
//!
//! - an offline elastic-net regression ([`enr`]) mapping per-cycle features
//!   to C/20 charge capacity, and
//! - an online clustering estimator ([`cluster`]) that tracks which training
//!   cell the monitored cell's aging-charge trajectory is closest to and
//!   blends their normalized capacity curves with Ah-weighted memory.
//!
//! [`fusion`] ramps the weight of the clustering estimate from 0 to 0.5 with
//! accumulated throughput. Both sources and the fused output are provably
//! bounded given bounded inputs, and the library checks those bounds in its
//! test suites.
//!
//! Supporting modules cover coulomb counting ([`trajectory`]), telemetry
//! segmentation ([`features`]), metrics ([`metrics`]), a seeded synthetic
//! fleet generator ([`synth`]), CSV/config I/O ([`io`]), the leave-one-out
//! and learning-rate harness ([`harness`]) and report emission ([`report`]).
//!
//! ```no_run
//! use soh_adapt::harness::{leave_one_out, Dataset, RunConfig};
//! use soh_adapt::synth::{generate, FleetSpec};
//!
//! let fleet = generate(&FleetSpec::default()).unwrap();
//! let cfg = RunConfig::default();
//! let data = Dataset::from_fleet(&fleet, &cfg.segmentation, &cfg.schema).unwrap();
//! let table = leave_one_out(&data, &cfg).unwrap();
//! println!("adaptive {:.2} %, ENR {:.2} %", table.mean_adaptive, table.mean_enr);
//! ```

pub mod cluster;
pub mod enr;
pub mod error;
pub mod features;
pub mod fusion;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod report;
pub mod synth;
pub mod trajectory;

pub use error::{Error, Result};
