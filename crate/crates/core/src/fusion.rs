//! Fusion of the regression and clustering estimates.
//!
//! `w₂ = min(α·Ah, 0.5)` and `w₁ = 1 − w₂`, so the online clustering
//! estimate gains influence as throughput accumulates but never outweighs
//! the offline regression.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::cluster::{classify_step, estimate_ct, ClassificationState, TrainingSet};
use crate::enr::{predict, EnrModel};
use crate::error::{Error, Result};
use crate::features::{build_feature_vector_with, CycleRecord, FeatureSchema};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Learning rate, 1/Ah.
    pub learn_alpha: f64,
    /// Expected total second-life throughput, Ah.
    pub ah_max: f64,
}

impl FusionConfig {
    pub fn new(learn_alpha: f64, ah_max: f64) -> Result<Self> {
        if !(learn_alpha >= 0.0) || !learn_alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "learn_alpha must be finite and >= 0, got {learn_alpha}"
            )));
        }
        if !(ah_max > 0.0) || !ah_max.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ah_max must be positive, got {ah_max}"
            )));
        }
        Ok(Self {
            learn_alpha,
            ah_max,
        })
    }

    /// `α = 1 / (20·ah_max)`.
    pub fn from_ah_max(ah_max: f64) -> Result<Self> {
        Self::new(1.0 / (20.0 * ah_max), ah_max)
    }
}

pub fn weights(config: &FusionConfig, ah: f64) -> (f64, f64) {
    let w2 = (config.learn_alpha * ah).min(0.5);
    (1.0 - w2, w2)
}

pub fn fuse(q_rg: f64, q_ct: f64, (w1, w2): (f64, f64)) -> Result<f64> {
    if !(w1 >= 0.0 && w2 >= 0.0) || (w1 + w2 - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidWeights { w1, w2 });
    }
    Ok(w1 * q_rg + w2 * q_ct)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionEstimate {
    pub ah: f64,
    pub q_rg: f64,
    pub q_ct: f64,
    pub w1: f64,
    pub w2: f64,
    pub q_hat: f64,
    /// 0-based training cell index.
    pub s_n: usize,
    pub lambda: Vec<f64>,
    /// Clustering error bound minus actual error, when truth is known.
    pub bibo_margin: Option<f64>,
}

/// Online estimator for one monitored cell.
#[derive(Debug, Clone)]
pub struct OnlineSession {
    model: EnrModel,
    schema: FeatureSchema,
    training: Arc<TrainingSet>,
    state: ClassificationState,
    config: FusionConfig,
    q0: f64,
    prev: Option<CycleRecord>,
    last_ah: Option<f64>,
    log: Vec<FusionEstimate>,
}

impl OnlineSession {
    /// `q0` is the monitored cell's initial C/20 capacity.
    pub fn new(
        model: EnrModel,
        schema: FeatureSchema,
        training: Arc<TrainingSet>,
        config: FusionConfig,
        q0: f64,
    ) -> Result<Self> {
        if model.beta.len() != schema.len() {
            return Err(Error::DimensionMismatch(format!(
                "model has {} coefficients, schema has {} features",
                model.beta.len(),
                schema.len()
            )));
        }
        if !(q0 > 0.0) || !q0.is_finite() {
            return Err(Error::NonPositiveQ0(q0));
        }
        let state = ClassificationState::new(training.len())?;
        Ok(Self {
            model,
            schema,
            training,
            state,
            config,
            q0,
            prev: None,
            last_ah: None,
            log: Vec::new(),
        })
    }

    fn check_order(&self, cycle: &CycleRecord) -> Result<()> {
        match self.last_ah {
            Some(last) if !(cycle.ah_at_charge > last) => Err(Error::StaleCycle {
                ah: cycle.ah_at_charge,
                last,
            }),
            _ => Ok(()),
        }
    }

    /// Processes one aging cycle and appends the fused estimate to the log.
    pub fn step(&mut self, cycle: &CycleRecord) -> Result<FusionEstimate> {
        self.check_order(cycle)?;
        let ah = cycle.ah_at_charge;
        let fv = build_feature_vector_with(&self.schema, cycle, self.prev.as_ref())?;
        let q_rg = predict(&self.model, &fv)?;
        match self.training.coverage() {
            Some((lo, hi)) if ah >= lo && ah <= hi => {}
            _ => {
                return Err(Error::GridMismatch(format!(
                    "Ah {ah} outside the training set's coverage"
                )))
            }
        }
        let s_n = classify_step(&mut self.state, &self.training, fv.q_age(), ah)?;
        let lambda = self.state.lambda().to_vec();
        let q_ct = estimate_ct(&self.training, &lambda, self.q0, ah)?;
        let (w1, w2) = weights(&self.config, ah);
        let q_hat = fuse(q_rg, q_ct, (w1, w2))?;
        let est = FusionEstimate {
            ah,
            q_rg,
            q_ct,
            w1,
            w2,
            q_hat,
            s_n,
            lambda,
            bibo_margin: None,
        };
        self.prev = Some(cycle.clone());
        self.last_ah = Some(ah);
        self.log.push(est.clone());
        Ok(est)
    }

    /// Records an aging cycle as the lag predecessor without estimating.
    pub fn skip(&mut self, cycle: &CycleRecord) -> Result<()> {
        self.check_order(cycle)?;
        build_feature_vector_with(&self.schema, cycle, None)?;
        self.prev = Some(cycle.clone());
        self.last_ah = Some(cycle.ah_at_charge);
        Ok(())
    }

    pub fn log(&self) -> &[FusionEstimate] {
        &self.log
    }

    pub fn log_mut(&mut self) -> &mut [FusionEstimate] {
        &mut self.log
    }

    pub fn into_log(self) -> Vec<FusionEstimate> {
        self.log
    }

    pub fn state(&self) -> &ClassificationState {
        &self.state
    }

    pub fn training(&self) -> &TrainingSet {
        &self.training
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }
}

/// Writes `ah,q_rg,q_ct,w1,w2,q_hat,s_n,lambda_1..K` with 1-based `s_n`.
pub fn write_log_csv<W: Write>(log: &[FusionEstimate], k: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["ah", "q_rg", "q_ct", "w1", "w2", "q_hat", "s_n"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=k).map(|i| format!("lambda_{i}")));
    w.write_record(&header)?;
    for e in log {
        if e.lambda.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "estimate carries {} weights, expected {k}",
                e.lambda.len()
            )));
        }
        let mut row: Vec<String> = [e.ah, e.q_rg, e.q_ct, e.w1, e.w2, e.q_hat]
            .iter()
            .map(|v| v.to_string())
            .collect();
        row.push((e.s_n + 1).to_string());
        row.extend(e.lambda.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a log written by [`write_log_csv`].
pub fn read_log_csv<R: Read>(reader: R) -> Result<Vec<FusionEstimate>> {
    let mut r = csv::Reader::from_reader(reader);
    let k = r.headers()?.len().saturating_sub(7);
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let bad = |msg: String| Error::SchemaError {
            file: "estimate log".into(),
            row,
            message: msg,
        };
        let num = |j: usize| -> Result<f64> {
            rec.get(j)
                .ok_or_else(|| bad(format!("missing column {j}")))?
                .parse::<f64>()
                .map_err(|e| bad(format!("column {j}: {e}")))
        };
        let s: usize = rec
            .get(6)
            .ok_or_else(|| bad("missing s_n".into()))?
            .parse()
            .map_err(|e| bad(format!("s_n: {e}")))?;
        if s == 0 || s > k {
            return Err(bad(format!("s_n {s} out of 1..={k}")));
        }
        out.push(FusionEstimate {
            ah: num(0)?,
            q_rg: num(1)?,
            q_ct: num(2)?,
            w1: num(3)?,
            w2: num(4)?,
            q_hat: num(5)?,
            s_n: s - 1,
            lambda: (7..7 + k).map(num).collect::<Result<_>>()?,
            bibo_margin: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        let cfg = FusionConfig::new(0.01, 100.0).unwrap();
        assert_eq!(weights(&cfg, 0.0), (1.0, 0.0));
        let (w1, w2) = weights(&cfg, 10.0);
        assert!((w1 - 0.9).abs() < 1e-15 && (w2 - 0.1).abs() < 1e-15);
        assert_eq!(weights(&cfg, 50.0), (0.5, 0.5));
        assert_eq!(weights(&cfg, 1e9), (0.5, 0.5));
    }

    #[test]
    fn default_learning_rate() {
        let cfg = FusionConfig::from_ah_max(8000.0).unwrap();
        assert_eq!(cfg.learn_alpha, 1.0 / 160000.0);
        assert!(FusionConfig::new(-1.0, 1.0).is_err());
        assert!(FusionConfig::new(1.0, 0.0).is_err());
    }

    #[test]
    fn fuse_examples() {
        assert_eq!(fuse(30.0, 32.0, (1.0, 0.0)).unwrap(), 30.0);
        assert_eq!(fuse(31.0, 31.0, (0.3, 0.7)).unwrap(), 31.0);
        assert_eq!(fuse(30.0, 32.0, (0.75, 0.25)).unwrap(), 30.5);
        assert!(matches!(
            fuse(30.0, 32.0, (0.6, 0.6)),
            Err(Error::InvalidWeights { .. })
        ));
        assert!(fuse(30.0, 32.0, (1.5, -0.5)).is_err());
    }

    #[test]
    fn log_csv_roundtrip() {
        let log = vec![
            FusionEstimate {
                ah: 64.5,
                q_rg: 31.2,
                q_ct: 32.25,
                w1: 0.99,
                w2: 0.01,
                q_hat: 0.99 * 31.2 + 0.01 * 32.25,
                s_n: 1,
                lambda: vec![0.0, 1.0],
                bibo_margin: None,
            };
            2
        ];
        let mut buf = Vec::new();
        write_log_csv(&log, 2, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("ah,q_rg,q_ct,w1,w2,q_hat,s_n,lambda_1,lambda_2\n"));
        assert_eq!(read_log_csv(buf.as_slice()).unwrap(), log);
    }
}
