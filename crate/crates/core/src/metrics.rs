//! MAPE, RMSE and RMSPE.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    /// Percent.
    pub mape: f64,
    /// Ampere-hours.
    pub rmse: f64,
    /// Percent.
    pub rmspe: f64,
    pub m: usize,
}

/// Scores `y_hat` against `y_true`. Truth values must be positive.
pub fn evaluate(y_true: &[f64], y_hat: &[f64]) -> Result<MetricReport> {
    if y_true.len() != y_hat.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_hat.len()));
    }
    if y_true.is_empty() {
        return Err(Error::LengthMismatch(0, 0));
    }
    if let Some((index, &value)) = y_true.iter().enumerate().find(|(_, &y)| !(y > 0.0)) {
        return Err(Error::NonPositiveTruth { index, value });
    }
    let m = y_true.len() as f64;
    let (mut abs_pct, mut sq, mut sq_pct) = (0.0, 0.0, 0.0);
    for (&y, &yh) in y_true.iter().zip(y_hat) {
        let err = yh - y;
        abs_pct += err.abs() / y;
        sq += err * err;
        sq_pct += (err / y) * (err / y);
    }
    Ok(MetricReport {
        mape: abs_pct / m * 100.0,
        rmse: (sq / m).sqrt(),
        rmspe: (sq_pct / m).sqrt() * 100.0,
        m: y_true.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors() {
        assert!(matches!(
            evaluate(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch(1, 2))
        ));
        assert!(evaluate(&[], &[]).is_err());
        assert!(matches!(
            evaluate(&[1.0, 0.0], &[1.0, 1.0]),
            Err(Error::NonPositiveTruth { index: 1, .. })
        ));
    }

    #[test]
    fn constant_relative_error_gives_equal_percent_metrics() {
        let y = [10.0, 20.0, 40.0];
        let yh: Vec<f64> = y.iter().map(|v| v * 1.05).collect();
        let r = evaluate(&y, &yh).unwrap();
        assert!((r.mape - r.rmspe).abs() < 1e-12);
        assert!((r.mape - 5.0).abs() < 1e-12);
    }
}
