//! Cycle segmentation, per-cycle charge integrals and regression features.

use std::fmt;

use crate::error::{Error, Result};
use crate::trajectory::{check_time_monotonic, cumulative_ah, integrate_charge, TimeSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CycleType {
    Aging,
    C20Capacity,
    Hppc,
    Ocv,
}

impl CycleType {
    pub fn name(self) -> &'static str {
        match self {
            CycleType::Aging => "aging",
            CycleType::C20Capacity => "c20_capacity",
            CycleType::Hppc => "hppc",
            CycleType::Ocv => "ocv",
        }
    }
}

impl fmt::Display for CycleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One segmented cycle of a cell's telemetry.
///
/// `t_ch` is the last zero-current sample before the charge phase and
/// `t_dis` the last sample before the discharge phase, so the charge
/// integral over `[t_ch, t_dis]` covers the whole charge phase.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cell_id: String,
    /// 1-based position among all cycles of the stream.
    pub cycle_index: usize,
    pub cycle_type: CycleType,
    pub samples: Vec<TimeSample>,
    pub t_ch: f64,
    pub t_dis: f64,
    /// Throughput accumulated from the start of the stream up to `t_ch`.
    pub ah_at_charge: f64,
    /// Throughput accumulated up to the last sample of the cycle.
    pub ah_end: f64,
}

impl CycleRecord {
    pub fn duration_s(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationConfig {
    /// Samples with `|I|` below this are treated as resting.
    pub rest_current_a: f64,
    /// Minimum rest dwell that separates two cycles.
    pub rest_duration_s: f64,
    /// Used to derive the C/20 rate.
    pub nominal_capacity_ah: f64,
    /// Relative band around the C/20 current that classifies a cycle as a
    /// capacity test.
    pub c20_tolerance: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            rest_current_a: 0.05,
            rest_duration_s: 600.0,
            nominal_capacity_ah: 33.1,
            c20_tolerance: 0.25,
        }
    }
}

impl SegmentationConfig {
    pub fn c20_current(&self) -> f64 {
        self.nominal_capacity_ah / 20.0
    }
}

/// Splits a stream into cycles at rests of at least `rest_duration_s`.
///
/// A segment with exactly one charge block followed by one discharge block
/// is a capacity test when its mean active `|I|` is within `c20_tolerance`
/// of the C/20 current and an aging cycle otherwise. Other patterns are
/// tagged `Hppc` (mixed pulse directions) or `Ocv` (single direction).
pub fn segment_cycles(
    cell_id: &str,
    samples: &[TimeSample],
    cfg: &SegmentationConfig,
) -> Result<Vec<CycleRecord>> {
    check_time_monotonic(samples)?;
    let cum = cumulative_ah(samples)?;
    let resting: Vec<bool> = samples
        .iter()
        .map(|s| s.current.abs() < cfg.rest_current_a)
        .collect();

    // (first, last) index of each qualifying rest run
    let mut separators = Vec::new();
    let mut i = 0;
    while i < samples.len() {
        if !resting[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < samples.len() && resting[i + 1] {
            i += 1;
        }
        if samples[i].t - samples[start].t >= cfg.rest_duration_s {
            separators.push((start, i));
        }
        i += 1;
    }
    if separators.is_empty() {
        return Err(Error::UnsegmentableStream);
    }

    let mut bounds = Vec::new();
    let mut seg_start = 0;
    for &(rest_first, rest_last) in &separators {
        if rest_first > seg_start {
            bounds.push((seg_start, rest_first));
        }
        seg_start = rest_last;
    }
    if seg_start + 1 < samples.len() {
        bounds.push((seg_start, samples.len() - 1));
    }

    let mut cycles = Vec::new();
    for (lo, hi) in bounds {
        if hi <= lo || (lo..=hi).all(|k| resting[k]) {
            continue;
        }
        let idx = cycles.len() + 1;
        cycles.push(classify_segment(cell_id, idx, samples, &cum, &resting, lo, hi, cfg));
    }
    Ok(cycles)
}

#[allow(clippy::too_many_arguments)]
fn classify_segment(
    cell_id: &str,
    cycle_index: usize,
    samples: &[TimeSample],
    cum: &[f64],
    resting: &[bool],
    lo: usize,
    hi: usize,
    cfg: &SegmentationConfig,
) -> CycleRecord {
    // direction blocks among active samples
    let mut blocks: Vec<(bool, usize)> = Vec::new();
    let mut active_abs = 0.0;
    let mut active_n = 0usize;
    for k in lo..=hi {
        if resting[k] {
            continue;
        }
        active_abs += samples[k].current.abs();
        active_n += 1;
        let charging = samples[k].current > 0.0;
        if blocks.last().map(|b| b.0) != Some(charging) {
            blocks.push((charging, k));
        }
    }

    let seg = samples[lo..=hi].to_vec();
    let marker = |first_active: usize| first_active.max(lo + 1) - 1;
    let (cycle_type, ch_idx, dis_idx) = match blocks.as_slice() {
        [(true, c), (false, d)] => {
            let mean_abs = active_abs / active_n as f64;
            let c20 = cfg.c20_current();
            let ty = if (mean_abs - c20).abs() <= cfg.c20_tolerance * c20 {
                CycleType::C20Capacity
            } else {
                CycleType::Aging
            };
            (ty, marker(*c), marker(*d))
        }
        bl if bl.iter().any(|b| b.0) && bl.iter().any(|b| !b.0) => (CycleType::Hppc, lo, hi),
        _ => (CycleType::Ocv, lo, hi),
    };

    CycleRecord {
        cell_id: cell_id.to_string(),
        cycle_index,
        cycle_type,
        samples: seg,
        t_ch: samples[ch_idx].t,
        t_dis: samples[dis_idx].t,
        ah_at_charge: cum[ch_idx],
        ah_end: cum[hi],
    }
}

fn require(cycle: &CycleRecord, expected: CycleType) -> Result<()> {
    if cycle.cycle_type != expected {
        return Err(Error::WrongCycleType {
            expected: expected.name(),
            actual: cycle.cycle_type.name(),
        });
    }
    Ok(())
}

/// Charge throughput of an aging cycle, `∫ I dt` over `[t_ch, t_dis]`.
pub fn cycle_q_age(cycle: &CycleRecord) -> Result<f64> {
    require(cycle, CycleType::Aging)?;
    integrate_charge(&cycle.samples, cycle.t_ch, cycle.t_dis)
}

/// C/20 charge capacity of a capacity-test cycle; the health label.
pub fn cycle_q_c20(cycle: &CycleRecord) -> Result<f64> {
    require(cycle, CycleType::C20Capacity)?;
    integrate_charge(&cycle.samples, cycle.t_ch, cycle.t_dis)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseFeature {
    QAge,
    MeanVCharge,
    MeanT,
    DurationS,
    AhEnd,
}

impl BaseFeature {
    pub fn name(self) -> &'static str {
        match self {
            BaseFeature::QAge => "q_age",
            BaseFeature::MeanVCharge => "mean_v_charge",
            BaseFeature::MeanT => "mean_t",
            BaseFeature::DurationS => "duration_s",
            BaseFeature::AhEnd => "ah_end",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name.trim() {
            "q_age" => BaseFeature::QAge,
            "mean_v_charge" => BaseFeature::MeanVCharge,
            "mean_t" => BaseFeature::MeanT,
            "duration_s" => BaseFeature::DurationS,
            "ah_end" => BaseFeature::AhEnd,
            other => return Err(Error::InvalidSchema(format!("unknown feature `{other}`"))),
        })
    }

    fn extract(self, cycle: &CycleRecord) -> Result<f64> {
        Ok(match self {
            BaseFeature::QAge => cycle_q_age(cycle)?,
            BaseFeature::MeanVCharge => {
                let window = cycle
                    .samples
                    .iter()
                    .filter(|s| s.t >= cycle.t_ch && s.t <= cycle.t_dis);
                mean(window.map(|s| s.voltage))
            }
            BaseFeature::MeanT => mean(cycle.samples.iter().map(|s| s.temperature)),
            BaseFeature::DurationS => cycle.duration_s(),
            BaseFeature::AhEnd => cycle.ah_end,
        })
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Per-cycle features, concatenated with the same features of the previous
/// aging cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    base: Vec<BaseFeature>,
}

impl Default for FeatureSchema {
    fn default() -> Self {
        Self {
            base: vec![
                BaseFeature::QAge,
                BaseFeature::MeanVCharge,
                BaseFeature::MeanT,
                BaseFeature::DurationS,
                BaseFeature::AhEnd,
            ],
        }
    }
}

impl FeatureSchema {
    /// The first feature must be `q_age`.
    pub fn new(base: Vec<BaseFeature>) -> Result<Self> {
        if base.first() != Some(&BaseFeature::QAge) {
            return Err(Error::InvalidSchema("first feature must be q_age".into()));
        }
        for (i, f) in base.iter().enumerate() {
            if base[..i].contains(f) {
                return Err(Error::InvalidSchema(format!("duplicate feature {}", f.name())));
            }
        }
        Ok(Self { base })
    }

    /// Parses a comma-separated list such as `q_age,mean_t`.
    pub fn parse(list: &str) -> Result<Self> {
        let base = list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(BaseFeature::parse)
            .collect::<Result<Vec<_>>>()?;
        Self::new(base)
    }

    pub fn base(&self) -> &[BaseFeature] {
        &self.base
    }

    /// Total vector length (current plus lagged block).
    pub fn len(&self) -> usize {
        2 * self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        let current = self.base.iter().map(|f| f.name().to_string());
        let lagged = self.base.iter().map(|f| format!("{}_prev", f.name()));
        current.chain(lagged).collect()
    }
}

/// Regression input for one aging cycle, located at the cycle's charge-start
/// throughput.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub ah: f64,
    pub entries: Vec<f64>,
}

impl FeatureVector {
    pub fn q_age(&self) -> f64 {
        self.entries[0]
    }
}

/// Feature vector with the default five-feature schema.
pub fn build_feature_vector(
    cycle: &CycleRecord,
    prev: Option<&CycleRecord>,
) -> Result<FeatureVector> {
    build_feature_vector_with(&FeatureSchema::default(), cycle, prev)
}

/// Missing predecessors contribute a block of zeros.
pub fn build_feature_vector_with(
    schema: &FeatureSchema,
    cycle: &CycleRecord,
    prev: Option<&CycleRecord>,
) -> Result<FeatureVector> {
    require(cycle, CycleType::Aging)?;
    if let Some(p) = prev {
        require(p, CycleType::Aging)?;
    }
    let mut entries = Vec::with_capacity(schema.len());
    for f in &schema.base {
        entries.push(f.extract(cycle)?);
    }
    for f in &schema.base {
        entries.push(match prev {
            Some(p) => f.extract(p)?,
            None => 0.0,
        });
    }
    Ok(FeatureVector {
        ah: cycle.ah_at_charge,
        entries,
    })
}
