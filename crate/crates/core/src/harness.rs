//! Dataset assembly, leave-one-out evaluation and the learning-rate sweep.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::cluster::{TrainingCell, TrainingSet};
use crate::enr::{fit_cv, EnrModel};
use crate::error::{Error, Result};
use crate::features::{
    build_feature_vector_with, cycle_q_age, cycle_q_c20, segment_cycles, CycleRecord, CycleType,
    FeatureSchema, FeatureVector, SegmentationConfig,
};
use crate::fusion::{FusionConfig, FusionEstimate, OnlineSession};
use crate::io::parse_kv;
use crate::metrics::{evaluate, MetricReport};
use crate::synth::{FleetSpec, SyntheticFleet};
use crate::trajectory::{normalize_capacity, TimeSample, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub telemetry_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub lambda_grid: Vec<f64>,
    pub mix_grid: Vec<f64>,
    pub folds: usize,
    /// Overrides the default `1 / (20·ah_max)`.
    pub learn_alpha: Option<f64>,
    /// Defaults to the largest training-cell throughput.
    pub ah_max: Option<f64>,
    pub segmentation: SegmentationConfig,
    pub schema: FeatureSchema,
    pub fleet: FleetSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            telemetry_dir: None,
            output_dir: PathBuf::from("out"),
            lambda_grid: vec![0.001, 0.01, 0.1],
            mix_grid: vec![0.5],
            folds: 3,
            learn_alpha: None,
            ah_max: None,
            segmentation: SegmentationConfig::default(),
            schema: FeatureSchema::default(),
            fleet: FleetSpec::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| Error::InvalidConfig(format!("`{key}`: {e}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|s| parse_num::<f64>(key, s.trim()))
        .collect()
}

fn parse_pair(key: &str, v: &str) -> Result<(f64, f64)> {
    match parse_list(key, v)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::InvalidConfig(format!("`{key}` needs two values"))),
    }
}

impl RunConfig {
    /// Parses a `key = value` config on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in parse_kv(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Applies a single setting.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let f = &mut self.fleet;
        let s = &mut self.segmentation;
        match key {
            "telemetry_dir" => self.telemetry_dir = Some(PathBuf::from(v)),
            "output_dir" => self.output_dir = PathBuf::from(v),
            "lambda_grid" => self.lambda_grid = parse_list(key, v)?,
            "mix_grid" => self.mix_grid = parse_list(key, v)?,
            "folds" => self.folds = parse_num(key, v)?,
            "learn_alpha" => self.learn_alpha = Some(parse_num(key, v)?),
            "ah_max" => self.ah_max = Some(parse_num(key, v)?),
            "features" => self.schema = FeatureSchema::parse(v)?,
            "rest_current_a" => s.rest_current_a = parse_num(key, v)?,
            "rest_duration_s" => s.rest_duration_s = parse_num(key, v)?,
            "nominal_capacity_ah" => {
                s.nominal_capacity_ah = parse_num(key, v)?;
                f.nominal_capacity_ah = s.nominal_capacity_ah;
            }
            "c20_tolerance" => s.c20_tolerance = parse_num(key, v)?,
            "seed" => f.seed = parse_num(key, v)?,
            "n_cells" => f.n_cells = parse_num(key, v)?,
            "n_groups" => f.n_groups = parse_num(key, v)?,
            "cycles_per_cell" => f.cycles_per_cell = parse_num(key, v)?,
            "q0_range" => f.q0_range = parse_pair(key, v)?,
            "hump_amplitude" => f.hump_amplitude = parse_num(key, v)?,
            "fade_rate" => f.fade_rate = parse_num(key, v)?,
            "noise_sigma" => f.noise_sigma = parse_num(key, v)?,
            "group_separation" => f.group_separation = parse_num(key, v)?,
            "age_base_ah" => f.age_base_ah = parse_num(key, v)?,
            "rpt_interval" => f.rpt_interval = parse_num(key, v)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() || self.mix_grid.is_empty() {
            return Err(Error::InvalidConfig("hyperparameter grids must be nonempty".into()));
        }
        if self.lambda_grid.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidConfig("lambda_grid values must be >= 0".into()));
        }
        if self.mix_grid.iter().any(|&m| !(0.0..=1.0).contains(&m)) {
            return Err(Error::InvalidConfig("mix_grid values must lie in [0, 1]".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig("folds must be >= 2".into()));
        }
        if let Some(a) = self.learn_alpha {
            FusionConfig::new(a, 1.0)?;
        }
        if let Some(m) = self.ah_max {
            FusionConfig::new(0.0, m)?;
        }
        let s = &self.segmentation;
        if !(s.rest_current_a > 0.0 && s.rest_duration_s > 0.0 && s.nominal_capacity_ah > 0.0) {
            return Err(Error::InvalidConfig("segmentation thresholds must be positive".into()));
        }
        if !(s.c20_tolerance > 0.0 && s.c20_tolerance < 1.0) {
            return Err(Error::InvalidConfig("c20_tolerance must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// One cell's segmented stream and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CellData {
    pub cell_id: String,
    /// 0-based generating group, when known.
    pub group: Option<usize>,
    /// Initial C/20 capacity.
    pub q0: f64,
    /// Aging cycles in stream order.
    pub aging: Vec<CycleRecord>,
    /// One vector per aging cycle, lagged on the previous aging cycle.
    pub features: Vec<FeatureVector>,
    /// Measured aging charge over Ah.
    pub q_age: Trajectory,
    /// C/20 capacity labels over Ah.
    pub capacity: Trajectory,
}

impl CellData {
    pub fn from_stream(
        cell_id: &str,
        samples: &[TimeSample],
        seg: &SegmentationConfig,
        schema: &FeatureSchema,
    ) -> Result<Self> {
        let cycles = segment_cycles(cell_id, samples, seg)?;
        let aging: Vec<CycleRecord> = cycles
            .iter()
            .filter(|c| c.cycle_type == CycleType::Aging)
            .cloned()
            .collect();
        let mut cap_ah = Vec::new();
        let mut cap_q = Vec::new();
        for c in cycles.iter().filter(|c| c.cycle_type == CycleType::C20Capacity) {
            cap_ah.push(c.ah_at_charge);
            cap_q.push(cycle_q_c20(c)?);
        }
        if cap_q.is_empty() || aging.is_empty() {
            return Err(Error::InvalidTrainingSet(format!(
                "cell {cell_id} needs at least one capacity test and one aging cycle"
            )));
        }
        let q0 = cap_q[0];
        let capacity = Trajectory::from_vecs(cap_ah, cap_q)?;
        let mut features = Vec::with_capacity(aging.len());
        let mut ah = Vec::with_capacity(aging.len());
        let mut q = Vec::with_capacity(aging.len());
        for (i, c) in aging.iter().enumerate() {
            let prev = i.checked_sub(1).map(|j| &aging[j]);
            features.push(build_feature_vector_with(schema, c, prev)?);
            ah.push(c.ah_at_charge);
            q.push(cycle_q_age(c)?);
        }
        Ok(Self {
            cell_id: cell_id.to_string(),
            group: None,
            q0,
            aging,
            features,
            q_age: Trajectory::from_vecs(ah, q)?,
            capacity,
        })
    }

    /// Normalized capacity `Q̄ = Q / q0`.
    pub fn q_bar(&self) -> Result<Trajectory> {
        normalize_capacity(&self.capacity, self.q0)
    }

    fn training_cell(&self) -> Result<TrainingCell> {
        Ok(TrainingCell {
            cell_id: self.cell_id.clone(),
            q_age: self.q_age.clone(),
            q_bar: self.q_bar()?,
            q0: self.q0,
            features: self.features.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub cells: Vec<CellData>,
    pub schema: FeatureSchema,
}

impl Dataset {
    pub fn from_streams(
        streams: &BTreeMap<String, Vec<TimeSample>>,
        seg: &SegmentationConfig,
        schema: &FeatureSchema,
    ) -> Result<Self> {
        let cells = streams
            .par_iter()
            .map(|(id, s)| CellData::from_stream(id, s, seg, schema))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cells,
            schema: schema.clone(),
        })
    }

    /// Builds from generated telemetry, keeping group labels.
    pub fn from_fleet(
        fleet: &SyntheticFleet,
        seg: &SegmentationConfig,
        schema: &FeatureSchema,
    ) -> Result<Self> {
        let cells = fleet
            .cells
            .par_iter()
            .map(|c| {
                let mut d = CellData::from_stream(&c.cell_id, &c.samples, seg, schema)?;
                d.group = Some(c.group);
                Ok(d)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cells,
            schema: schema.clone(),
        })
    }

    pub fn index_of(&self, cell_id: &str) -> Result<usize> {
        self.cells
            .iter()
            .position(|c| c.cell_id == cell_id)
            .ok_or_else(|| Error::UnknownCell(cell_id.to_string()))
    }
}

/// Regression rows from aging cycles inside each cell's label span,
/// labeled by interpolated capacity and ordered by Ah.
pub fn regression_rows(cells: &[&CellData]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut rows: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    for c in cells {
        let (lo, hi) = c.capacity.span().expect("nonempty capacity");
        for fv in &c.features {
            if fv.ah >= lo && fv.ah <= hi {
                rows.push((fv.ah, fv.entries.clone(), c.capacity.value_at(fv.ah)?));
            }
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rows.into_iter().map(|(_, x, y)| (x, y)).unzip())
}

/// Fits the regression on the given cells with cross-validated
/// hyperparameters.
pub fn fit_offline(cells: &[&CellData], schema: &FeatureSchema, cfg: &RunConfig) -> Result<EnrModel> {
    let (x, y) = regression_rows(cells)?;
    fit_cv(&x, &y, &cfg.lambda_grid, &cfg.mix_grid, cfg.folds)?.with_names(schema.names())
}

/// Everything learned from the training cells of one fold.
#[derive(Debug, Clone)]
pub struct Fold {
    pub test_index: usize,
    pub model: EnrModel,
    pub training: Arc<TrainingSet>,
    /// Largest training throughput.
    pub ah_max: f64,
}

pub fn prepare_fold(data: &Dataset, test_index: usize, cfg: &RunConfig) -> Result<Fold> {
    if test_index >= data.cells.len() {
        return Err(Error::UnknownCell(format!("index {test_index}")));
    }
    let train: Vec<&CellData> = data
        .cells
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != test_index)
        .map(|(_, c)| c)
        .collect();
    if train.len() < 2 {
        return Err(Error::TooFewCells {
            needed: 3,
            got: data.cells.len(),
        });
    }
    let model = fit_offline(&train, &data.schema, cfg)?;
    let training = TrainingSet::new(
        train
            .iter()
            .map(|c| c.training_cell())
            .collect::<Result<_>>()?,
    )?;
    let ah_max = train
        .iter()
        .map(|c| c.capacity.span().map_or(0.0, |s| s.1))
        .fold(0.0, f64::max);
    Ok(Fold {
        test_index,
        model,
        training: Arc::new(training),
        ah_max,
    })
}

impl Fold {
    pub fn fusion_config(&self, cfg: &RunConfig) -> Result<FusionConfig> {
        let ah_max = cfg.ah_max.unwrap_or(self.ah_max);
        match cfg.learn_alpha {
            Some(a) => FusionConfig::new(a, ah_max),
            None => FusionConfig::from_ah_max(ah_max),
        }
    }
}

/// Replays the test cell's aging cycles. Cycles outside the training
/// coverage only update the lag predecessor. Each estimate carries the
/// clustering error margin against the cell's own labels where those are
/// defined.
pub fn replay(fold: &Fold, cell: &CellData, schema: &FeatureSchema, fusion: FusionConfig) -> Result<Vec<FusionEstimate>> {
    let session = run_session(fold, cell, schema, fusion)?;
    let q_bar_z = cell.q_bar()?;
    let mut log = session.into_log();
    for e in &mut log {
        e.bibo_margin = bibo_margin(&fold.training, &q_bar_z, cell.q0, e)?;
    }
    Ok(log)
}

/// Runs the session over every aging cycle and returns it for inspection.
pub fn run_session(fold: &Fold, cell: &CellData, schema: &FeatureSchema, fusion: FusionConfig) -> Result<OnlineSession> {
    let mut session = OnlineSession::new(
        fold.model.clone(),
        schema.clone(),
        Arc::clone(&fold.training),
        fusion,
        cell.q0,
    )?;
    let (lo, hi) = fold
        .training
        .coverage()
        .ok_or_else(|| Error::InvalidTrainingSet("training trajectories do not overlap".into()))?;
    for c in &cell.aging {
        if c.ah_at_charge >= lo && c.ah_at_charge <= hi {
            session.step(c)?;
        } else {
            session.skip(c)?;
        }
    }
    Ok(session)
}

fn bibo_margin(training: &TrainingSet, q_bar_z: &Trajectory, q0: f64, e: &FusionEstimate) -> Result<Option<f64>> {
    let Ok(z) = q_bar_z.value_at(e.ah) else {
        return Ok(None);
    };
    let mut worst: f64 = 0.0;
    for k in training.cells() {
        worst = worst.max((k.q_bar.value_at(e.ah)? - z).abs());
    }
    Ok(Some(q0 * worst - (e.q_ct - q0 * z).abs()))
}

/// Estimates interpolated to the label points inside the processed span.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub ah: Vec<f64>,
    pub truth: Vec<f64>,
    pub adaptive: Vec<f64>,
    pub enr: Vec<f64>,
}

pub fn score_points(log: &[FusionEstimate], capacity: &Trajectory) -> Result<Scored> {
    if log.is_empty() {
        return Err(Error::EmptyState);
    }
    let ah: Vec<f64> = log.iter().map(|e| e.ah).collect();
    let hat = Trajectory::from_vecs(ah.clone(), log.iter().map(|e| e.q_hat).collect())?;
    let rg = Trajectory::from_vecs(ah, log.iter().map(|e| e.q_rg).collect())?;
    let (lo, hi) = hat.span().expect("nonempty log");
    let mut out = Scored {
        ah: Vec::new(),
        truth: Vec::new(),
        adaptive: Vec::new(),
        enr: Vec::new(),
    };
    for (a, q) in capacity.iter().filter(|(a, _)| *a >= lo && *a <= hi) {
        out.ah.push(a);
        out.truth.push(q);
        out.adaptive.push(hat.value_at(a)?);
        out.enr.push(rg.value_at(a)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooRow {
    pub cell_id: String,
    pub adaptive: MetricReport,
    pub enr: MetricReport,
    /// Aging cycles estimated.
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct LooTable {
    pub rows: Vec<LooRow>,
    /// Mean RMSPE of the fused estimator, percent.
    pub mean_adaptive: f64,
    /// Mean RMSPE of the regression alone, percent.
    pub mean_enr: f64,
    /// Estimate log per held-out cell, in row order.
    pub logs: Vec<Vec<FusionEstimate>>,
    pub folds: Vec<Fold>,
}

/// Holds out each cell in turn; folds run in parallel.
pub fn leave_one_out(data: &Dataset, cfg: &RunConfig) -> Result<LooTable> {
    if data.cells.len() < 3 {
        return Err(Error::TooFewCells {
            needed: 3,
            got: data.cells.len(),
        });
    }
    let results = (0..data.cells.len())
        .into_par_iter()
        .map(|z| -> Result<(LooRow, Vec<FusionEstimate>, Fold)> {
            let fold = prepare_fold(data, z, cfg)?;
            let cell = &data.cells[z];
            let log = replay(&fold, cell, &data.schema, fold.fusion_config(cfg)?)?;
            let s = score_points(&log, &cell.capacity)?;
            let row = LooRow {
                cell_id: cell.cell_id.clone(),
                adaptive: evaluate(&s.truth, &s.adaptive)?,
                enr: evaluate(&s.truth, &s.enr)?,
                steps: log.len(),
            };
            Ok((row, log, fold))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = results.len() as f64;
    let mean_adaptive = results.iter().map(|r| r.0.adaptive.rmspe).sum::<f64>() / n;
    let mean_enr = results.iter().map(|r| r.0.enr.rmspe).sum::<f64>() / n;
    let mut rows = Vec::new();
    let mut logs = Vec::new();
    let mut folds = Vec::new();
    for (r, l, f) in results {
        rows.push(r);
        logs.push(l);
        folds.push(f);
    }
    Ok(LooTable {
        rows,
        mean_adaptive,
        mean_enr,
        logs,
        folds,
    })
}

/// RMSE of the fused estimate for each learning rate, with the held-out
/// cell's fold fitted once.
pub fn alpha_sweep(data: &Dataset, test_cell: &str, alphas: &[f64], cfg: &RunConfig) -> Result<Vec<(f64, f64)>> {
    if alphas.is_empty() {
        return Err(Error::InvalidConfig("alpha list is empty".into()));
    }
    let z = data.index_of(test_cell)?;
    let fold = prepare_fold(data, z, cfg)?;
    let ah_max = cfg.ah_max.unwrap_or(fold.ah_max);
    let cell = &data.cells[z];
    alphas
        .par_iter()
        .map(|&a| {
            let log = replay(&fold, cell, &data.schema, FusionConfig::new(a, ah_max)?)?;
            let s = score_points(&log, &cell.capacity)?;
            Ok((a, evaluate(&s.truth, &s.adaptive)?.rmse))
        })
        .collect()
}

/// ENR-only RMSE for the held-out cell, the `α = 0` reference.
pub fn enr_only_rmse(data: &Dataset, test_cell: &str, cfg: &RunConfig) -> Result<f64> {
    let z = data.index_of(test_cell)?;
    let fold = prepare_fold(data, z, cfg)?;
    let cell = &data.cells[z];
    let log = replay(&fold, cell, &data.schema, fold.fusion_config(cfg)?)?;
    let s = score_points(&log, &cell.capacity)?;
    Ok(evaluate(&s.truth, &s.enr)?.rmse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let cfg = RunConfig::from_text(
            "lambda_grid = 0.1, 1\nmix_grid=0,1\nfolds=4\nlearn_alpha=1e-4\n\
             features=q_age,mean_t\nseed=7\nq0_range=29,31\n",
        )
        .unwrap();
        assert_eq!(cfg.lambda_grid, vec![0.1, 1.0]);
        assert_eq!(cfg.mix_grid, vec![0.0, 1.0]);
        assert_eq!(cfg.folds, 4);
        assert_eq!(cfg.learn_alpha, Some(1e-4));
        assert_eq!(cfg.schema.len(), 4);
        assert_eq!(cfg.fleet.seed, 7);
        assert_eq!(cfg.fleet.q0_range, (29.0, 31.0));
        assert!(RunConfig::from_text("bogus = 1").is_err());
        assert!(RunConfig::from_text("lambda_grid = ").is_err());
        assert!(RunConfig::from_text("mix_grid = 2").is_err());
        assert!(RunConfig::from_text("folds = 1").is_err());
    }
}
