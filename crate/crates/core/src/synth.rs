//! Seeded synthetic second-life fleets.
//!
//! Each cell's C/20 capacity follows
//!
//! ```text
//! Q(Ah) = q0 · (1 + hump · h(Ah / span) − fade · Ah),   h(u) = 4u(1 − u)
//! ```
//!
//! so capacity first rises above its initial value and then falls, the way
//! retired cells behave through a warm season. Aging cycles charge
//! `age_base · Q̄(Ah) + group · group_separation` Ah (plus Gaussian noise),
//! which gives every group a distinct aging-charge trajectory. Raw telemetry
//! is piecewise linear in current with a sample at every breakpoint, so
//! trapezoidal coulomb counting recovers the intended charges to rounding
//! error.
//!
//! Streams open with a rest and a reference test (C/20 capacity cycle plus
//! an HPPC pulse train), repeat the reference test every `rpt_interval`
//! aging cycles, and close with a final one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::features::{CycleRecord, CycleType};
use crate::trajectory::{TimeSample, Trajectory};

const RAMP_S: f64 = 1.0;
const MIN_GAP_S: f64 = 1.0;
const LONG_REST_S: f64 = 1200.0;
const MID_REST_S: f64 = 300.0;
const REST_PERIOD_S: f64 = 600.0;
const AGING_PERIOD_S: f64 = 300.0;
const C20_PERIOD_S: f64 = 600.0;
const OHMIC_R: f64 = 0.002;

#[derive(Debug, Clone, PartialEq)]
pub struct FleetSpec {
    pub seed: u64,
    pub n_cells: usize,
    pub n_groups: usize,
    /// Aging cycles per cell, excluding reference tests.
    pub cycles_per_cell: usize,
    /// Initial capacities are drawn uniformly from this range, Ah.
    pub q0_range: (f64, f64),
    /// Peak relative capacity gain of the seasonal bump.
    pub hump_amplitude: f64,
    /// Linear capacity fade, fraction per Ah.
    pub fade_rate: f64,
    /// Standard deviation of the aging-charge observation noise, Ah.
    pub noise_sigma: f64,
    /// Aging-charge offset between consecutive groups, Ah.
    pub group_separation: f64,
    /// Aging-cycle charge of a fresh cell in the first group, Ah.
    pub age_base_ah: f64,
    /// Aging cycles between reference tests.
    pub rpt_interval: usize,
    /// Sets the C/20 test current.
    pub nominal_capacity_ah: f64,
}

impl Default for FleetSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_cells: 8,
            n_groups: 2,
            cycles_per_cell: 200,
            q0_range: (30.0, 34.0),
            hump_amplitude: 0.08,
            fade_rate: 4e-6,
            noise_sigma: 0.1,
            group_separation: 0.5,
            age_base_ah: 20.0,
            rpt_interval: 20,
            nominal_capacity_ah: 33.1,
        }
    }
}

impl FleetSpec {
    /// Throughput over which the seasonal bump completes.
    pub fn ah_span(&self) -> f64 {
        self.cycles_per_cell as f64 * 2.0 * self.age_base_ah
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n_cells < 2 {
            return bad(format!("n_cells must be >= 2, got {}", self.n_cells));
        }
        if self.n_groups < 1 || self.n_groups > self.n_cells {
            return bad(format!(
                "n_groups must lie in 1..={}, got {}",
                self.n_cells, self.n_groups
            ));
        }
        if self.cycles_per_cell < 1 || self.rpt_interval < 1 {
            return bad("cycles_per_cell and rpt_interval must be >= 1".into());
        }
        let (lo, hi) = self.q0_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("invalid q0_range ({lo}, {hi})"));
        }
        for (name, v) in [
            ("hump_amplitude", self.hump_amplitude),
            ("fade_rate", self.fade_rate),
            ("noise_sigma", self.noise_sigma),
            ("group_separation", self.group_separation),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.age_base_ah > 0.0) || !(self.nominal_capacity_ah > 0.0) {
            return bad("age_base_ah and nominal_capacity_ah must be positive".into());
        }
        if self.noise_sigma > 0.1 * self.age_base_ah {
            return bad("noise_sigma must not exceed 10% of age_base_ah".into());
        }
        // worst case: full fade jitter over a generous throughput bound
        let top = self.age_base_ah + (self.n_groups - 1) as f64 * self.group_separation;
        let ah_bound = 2.0 * self.ah_span() * (1.0 + top / self.age_base_ah) + 1e3;
        if 1.0 - 1.1 * self.fade_rate * ah_bound <= 0.2 {
            return bad("fade_rate too large: capacity would collapse".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCell {
    pub cell_id: String,
    /// 0-based generating group.
    pub group: usize,
    pub q0: f64,
    pub samples: Vec<TimeSample>,
    /// Every cycle as laid out by the generator, in stream order.
    pub cycles: Vec<CycleRecord>,
    /// Intended aging-cycle charge at each aging cycle's charge start.
    pub q_age: Trajectory,
    /// True C/20 capacity at each capacity test's charge start.
    pub capacity: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFleet {
    pub spec: FleetSpec,
    pub cells: Vec<SyntheticCell>,
}

struct CellParams {
    q0: f64,
    hump: f64,
    fade: f64,
    offset: f64,
    span: f64,
}

impl CellParams {
    fn bump(&self, ah: f64) -> f64 {
        let u = (ah / self.span).clamp(0.0, 1.0);
        4.0 * u * (1.0 - u)
    }

    fn q_bar(&self, ah: f64) -> f64 {
        1.0 + self.hump * self.bump(ah) - self.fade * ah
    }

    fn temperature(&self, ah: f64) -> f64 {
        20.0 + 10.0 * self.bump(ah)
    }
}

/// Emits piecewise-linear telemetry while tracking time and throughput
/// analytically.
struct StreamBuilder {
    samples: Vec<TimeSample>,
    ah: f64,
    cycles: Vec<CycleRecord>,
    cell_id: String,
    open: Option<(usize, CycleType, f64, f64, f64)>,
}

impl StreamBuilder {
    fn new(cell_id: &str, temperature: f64) -> Self {
        Self {
            samples: vec![TimeSample::new(0.0, 0.0, 3.7, temperature)],
            ah: 0.0,
            cycles: Vec::new(),
            cell_id: cell_id.to_string(),
            open: None,
        }
    }

    fn t(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    fn push(&mut self, t: f64, current: f64, voltage: f64, temperature: f64) {
        self.samples
            .push(TimeSample::new(t, current, voltage, temperature));
    }

    fn rest(&mut self, duration: f64, temperature: f64) {
        let t0 = self.t();
        let end = t0 + duration;
        let mut k = 1.0;
        while t0 + k * REST_PERIOD_S < end - MIN_GAP_S {
            self.push(t0 + k * REST_PERIOD_S, 0.0, 3.7, temperature);
            k += 1.0;
        }
        self.push(end, 0.0, 3.7, temperature);
    }

    /// Ramp to `current`, hold, ramp back to zero; moves `amount_ah` of charge.
    fn phase(&mut self, current: f64, amount_ah: f64, period: f64, temperature: f64) {
        let mag = current.abs();
        let plateau = amount_ah * 3600.0 / mag - RAMP_S;
        debug_assert!(plateau > 0.0);
        let (v_from, v_to) = if current > 0.0 { (3.5, 4.1) } else { (4.1, 3.2) };
        let total = plateau + 2.0 * RAMP_S;
        let t0 = self.t();
        let volt = |t: f64, i: f64| v_from + (v_to - v_from) * (t - t0) / total + OHMIC_R * i;

        let start = t0 + RAMP_S;
        let end = start + plateau;
        self.push(start, current, volt(start, current), temperature);
        let mut k = 1.0;
        while start + k * period < end - MIN_GAP_S {
            let t = start + k * period;
            self.push(t, current, volt(t, current), temperature);
            k += 1.0;
        }
        self.push(end, current, volt(end, current), temperature);
        self.push(end + RAMP_S, 0.0, volt(end + RAMP_S, 0.0), temperature);
        self.ah += mag * (plateau + RAMP_S) / 3600.0;
    }

    fn begin_cycle(&mut self, ty: CycleType) {
        let idx = self.samples.len() - 1;
        let t = self.t();
        self.open = Some((idx, ty, t, t, self.ah));
    }

    fn mark_discharge(&mut self) {
        let t = self.t();
        if let Some(open) = self.open.as_mut() {
            open.3 = t;
        }
    }

    fn end_cycle(&mut self) {
        let (start, ty, t_ch, t_dis, ah_ch) = self.open.take().expect("cycle open");
        let samples = self.samples[start..].to_vec();
        let t_dis = if ty == CycleType::Hppc {
            self.t()
        } else {
            t_dis
        };
        self.cycles.push(CycleRecord {
            cell_id: self.cell_id.clone(),
            cycle_index: self.cycles.len() + 1,
            cycle_type: ty,
            samples,
            t_ch,
            t_dis,
            ah_at_charge: ah_ch,
            ah_end: self.ah,
        });
    }

    fn charge_discharge(&mut self, ty: CycleType, current: f64, amount: f64, period: f64, temp: f64) {
        self.begin_cycle(ty);
        self.phase(current, amount, period, temp);
        self.rest(MID_REST_S, temp);
        self.mark_discharge();
        self.phase(-current, amount, period, temp);
        self.end_cycle();
        self.rest(LONG_REST_S, temp);
    }

    fn hppc(&mut self, temp: f64) {
        self.begin_cycle(CycleType::Hppc);
        for k in 0..3 {
            if k > 0 {
                self.rest(40.0, temp);
            }
            self.phase(-30.0, 30.0 * 10.0 / 3600.0, 60.0, temp);
            self.rest(40.0, temp);
            self.phase(22.5, 22.5 * 10.0 / 3600.0, 60.0, temp);
        }
        self.end_cycle();
        self.rest(LONG_REST_S, temp);
    }
}

/// Generates a fleet; identical specs give bitwise-identical fleets.
pub fn generate(spec: &FleetSpec) -> Result<SyntheticFleet> {
    spec.validate()?;
    let mut members = vec![0usize; spec.n_groups];
    let cells = (0..spec.n_cells)
        .map(|i| {
            let group = i * spec.n_groups / spec.n_cells;
            members[group] += 1;
            let id = format!("{}.{}", group + 1, members[group]);
            generate_cell(spec, i, group, id)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticFleet {
        spec: spec.clone(),
        cells,
    })
}

fn cell_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index as u64 + 1))
}

fn generate_cell(spec: &FleetSpec, index: usize, group: usize, cell_id: String) -> Result<SyntheticCell> {
    let mut rng = cell_rng(spec.seed, index);
    let (lo, hi) = spec.q0_range;
    let q0 = if hi > lo { rng.random_range(lo..hi) } else { lo };
    let jitter = |rng: &mut ChaCha8Rng| 1.0 + 0.1 * rng.random_range(-1.0..1.0);
    let params = CellParams {
        q0,
        hump: spec.hump_amplitude * (1.0 + 0.5 * group as f64) * jitter(&mut rng),
        fade: spec.fade_rate * jitter(&mut rng),
        offset: group as f64 * spec.group_separation,
        span: spec.ah_span(),
    };
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::InvalidSpec(format!("noise_sigma: {e}")))?;
    let c20 = spec.nominal_capacity_ah / 20.0;

    let mut b = StreamBuilder::new(&cell_id, params.temperature(0.0));
    let mut cap_ah = Vec::new();
    let mut cap_q = Vec::new();
    let mut age_ah = Vec::new();
    let mut age_q = Vec::new();

    let reference_test = |b: &mut StreamBuilder, cap_ah: &mut Vec<f64>, cap_q: &mut Vec<f64>| {
        let temp = params.temperature(b.ah);
        let q = params.q0 * params.q_bar(b.ah);
        cap_ah.push(b.ah);
        cap_q.push(q);
        b.charge_discharge(CycleType::C20Capacity, c20, q, C20_PERIOD_S, temp);
        b.hppc(temp);
    };

    b.rest(LONG_REST_S, params.temperature(0.0));
    reference_test(&mut b, &mut cap_ah, &mut cap_q);
    for n in 0..spec.cycles_per_cell {
        if n > 0 && n % spec.rpt_interval == 0 {
            reference_test(&mut b, &mut cap_ah, &mut cap_q);
        }
        let ah = b.ah;
        let clean = spec.age_base_ah * params.q_bar(ah) + params.offset;
        let q_age = (clean + noise.sample(&mut rng)).max(0.05 * spec.age_base_ah);
        let current = rng.random_range(8.0..12.0);
        age_ah.push(ah);
        age_q.push(q_age);
        b.charge_discharge(CycleType::Aging, current, q_age, AGING_PERIOD_S, params.temperature(ah));
    }
    reference_test(&mut b, &mut cap_ah, &mut cap_q);

    Ok(SyntheticCell {
        cell_id,
        group,
        q0,
        samples: b.samples,
        cycles: b.cycles,
        q_age: Trajectory::from_vecs(age_ah, age_q)?,
        capacity: Trajectory::from_vecs(cap_ah, cap_q)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::check_time_monotonic;

    fn small() -> FleetSpec {
        FleetSpec {
            n_cells: 4,
            cycles_per_cell: 30,
            rpt_interval: 10,
            ..FleetSpec::default()
        }
    }

    #[test]
    fn degenerate_spec_has_constant_capacity() {
        let spec = FleetSpec {
            noise_sigma: 0.0,
            fade_rate: 0.0,
            hump_amplitude: 0.0,
            ..small()
        };
        let fleet = generate(&spec).unwrap();
        for c in &fleet.cells {
            assert!(c.capacity.values().iter().all(|&q| q == c.q0));
        }
    }

    #[test]
    fn same_seed_same_fleet() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
        let other = FleetSpec {
            seed: 1,
            ..small()
        };
        assert_ne!(generate(&small()).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn streams_are_well_formed() {
        let fleet = generate(&small()).unwrap();
        let ids: Vec<_> = fleet.cells.iter().map(|c| c.cell_id.as_str()).collect();
        assert_eq!(ids, ["1.1", "1.2", "2.1", "2.2"]);
        for c in &fleet.cells {
            check_time_monotonic(&c.samples).unwrap();
            assert_eq!(c.q_age.len(), 30);
            // initial, after cycles 10 and 20, final
            assert_eq!(c.capacity.len(), 4);
            assert_eq!(c.capacity.values()[0], c.q0);
            assert!(c.capacity.values().iter().all(|&q| q > 0.0));
            let aging = c
                .cycles
                .iter()
                .filter(|r| r.cycle_type == CycleType::Aging)
                .count();
            assert_eq!(aging, 30);
        }
    }

    #[test]
    fn invalid_specs() {
        let cases = [
            FleetSpec { n_cells: 1, ..small() },
            FleetSpec { n_groups: 0, ..small() },
            FleetSpec { n_groups: 5, ..small() },
            FleetSpec { noise_sigma: -1.0, ..small() },
            FleetSpec { q0_range: (0.0, 1.0), ..small() },
            FleetSpec { fade_rate: 1.0, ..small() },
        ];
        for spec in cases {
            assert!(matches!(generate(&spec), Err(Error::InvalidSpec(_))), "{spec:?}");
        }
    }
}
