//! Per-cell report files: estimate trajectories, pointwise errors, the
//! classification sequence and a text summary.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fusion::{write_log_csv, FusionEstimate};
use crate::metrics::{evaluate, MetricReport};
use crate::trajectory::Trajectory;

/// One held-out cell's session output.
#[derive(Debug, Clone)]
pub struct CellReport<'a> {
    pub cell_id: &'a str,
    pub log: &'a [FusionEstimate],
    /// True capacity at each log entry, `None` where unlabeled.
    pub truth: Vec<Option<f64>>,
    /// Training cell ids indexed by `s_n`.
    pub training_ids: Vec<String>,
}

/// Truth at each estimate, interpolated inside the label span.
pub fn truth_at_log(log: &[FusionEstimate], capacity: &Trajectory) -> Vec<Option<f64>> {
    log.iter().map(|e| capacity.value_at(e.ah).ok()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell_id: String,
    pub adaptive: Option<MetricReport>,
    pub enr: Option<MetricReport>,
    /// Log entries without a label.
    pub omitted: usize,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `<cell>_trajectories.csv`, `<cell>_errors.csv`,
/// `<cell>_classification.csv` per cell and a `summary.txt`. Returns the
/// written paths.
pub fn emit_report(dir: &Path, cells: &[CellReport<'_>]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut summaries = Vec::new();
    for c in cells {
        if c.log.is_empty() {
            return Err(Error::EmptyState);
        }
        if c.truth.len() != c.log.len() {
            return Err(Error::LengthMismatch(c.log.len(), c.truth.len()));
        }
        let k = c.training_ids.len();

        let path = dir.join(format!("{}_trajectories.csv", c.cell_id));
        write_log_csv(c.log, k, create(&path)?)?;
        written.push(path);

        let path = dir.join(format!("{}_errors.csv", c.cell_id));
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(["ah", "q_true", "q_hat", "q_rg", "pe_adaptive", "pe_enr"])?;
        let (mut y, mut hat, mut rg) = (Vec::new(), Vec::new(), Vec::new());
        for (e, t) in c.log.iter().zip(&c.truth) {
            let Some(t) = *t else { continue };
            if !(t > 0.0) {
                return Err(Error::NonPositiveTruth {
                    index: y.len(),
                    value: t,
                });
            }
            w.write_record([
                e.ah.to_string(),
                t.to_string(),
                e.q_hat.to_string(),
                e.q_rg.to_string(),
                ((e.q_hat - t) / t * 100.0).to_string(),
                ((e.q_rg - t) / t * 100.0).to_string(),
            ])?;
            y.push(t);
            hat.push(e.q_hat);
            rg.push(e.q_rg);
        }
        w.flush()?;
        written.push(path);

        let path = dir.join(format!("{}_classification.csv", c.cell_id));
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(["ah", "s_n", "cell_id"])?;
        for e in c.log {
            let id = c
                .training_ids
                .get(e.s_n)
                .ok_or(Error::PrefixOutOfRange { n: e.s_n + 1, len: k })?;
            w.write_record([e.ah.to_string(), (e.s_n + 1).to_string(), id.clone()])?;
        }
        w.flush()?;
        written.push(path);

        let labeled = !y.is_empty();
        summaries.push(CellSummary {
            cell_id: c.cell_id.to_string(),
            adaptive: if labeled { Some(evaluate(&y, &hat)?) } else { None },
            enr: if labeled { Some(evaluate(&y, &rg)?) } else { None },
            omitted: c.log.len() - y.len(),
        });
    }
    let path = dir.join("summary.txt");
    fs::write(&path, format_summary(&summaries))?;
    written.push(path);
    Ok(written)
}

fn metric_line(name: &str, m: &Option<MetricReport>) -> String {
    match m {
        Some(m) => format!(
            "  {name:<9} MAPE {:.4} %  RMSE {:.4} Ah  RMSPE {:.4} %  M {}\n",
            m.mape, m.rmse, m.rmspe, m.m
        ),
        None => format!("  {name:<9} no labeled points\n"),
    }
}

pub fn format_summary(summaries: &[CellSummary]) -> String {
    let mut s = String::new();
    for c in summaries {
        let _ = writeln!(s, "cell {}", c.cell_id);
        s.push_str(&metric_line("adaptive", &c.adaptive));
        s.push_str(&metric_line("enr", &c.enr));
        if c.omitted > 0 {
            let _ = writeln!(s, "  {} estimates without ground truth omitted", c.omitted);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(ah: f64, q: f64, s_n: usize) -> FusionEstimate {
        FusionEstimate {
            ah,
            q_rg: q,
            q_ct: q,
            w1: 1.0,
            w2: 0.0,
            q_hat: q,
            s_n,
            lambda: vec![0.5, 0.5],
            bibo_margin: None,
        }
    }

    #[test]
    fn perfect_estimates_and_missing_truth() {
        let dir = tempfile::tempdir().unwrap();
        let log = vec![est(10.0, 30.0, 0), est(20.0, 31.0, 1), est(30.0, 32.0, 1)];
        let cells = [CellReport {
            cell_id: "1.1",
            log: &log,
            truth: vec![Some(30.0), None, Some(32.0)],
            training_ids: vec!["1.2".into(), "2.1".into()],
        }];
        let files = emit_report(dir.path(), &cells).unwrap();
        assert_eq!(files.len(), 4);

        let errors = fs::read_to_string(dir.path().join("1.1_errors.csv")).unwrap();
        let rows: Vec<&str> = errors.lines().skip(1).collect();
        assert_eq!(rows, ["10,30,30,30,0,0", "30,32,32,32,0,0"]);

        let cls = fs::read_to_string(dir.path().join("1.1_classification.csv")).unwrap();
        assert_eq!(cls.lines().nth(2), Some("20,2,2.1"));

        let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.contains("1 estimates without ground truth omitted"));
        assert!(summary.contains("RMSPE 0.0000 %"));
    }

    #[test]
    fn empty_log_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cells = [CellReport {
            cell_id: "x",
            log: &[],
            truth: vec![],
            training_ids: vec![],
        }];
        assert!(emit_report(dir.path(), &cells).is_err());
    }
}
