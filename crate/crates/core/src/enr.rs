//! Elastic-net regression by cyclic coordinate descent.
//!
//! Minimizes, over standardized features `Z` and centered response `y`,
//!
//! ```text
//! (1/2n)·‖y − Zβ‖² + λ·[(1 − mix)/2·‖β‖² + mix·‖β‖₁]
//! ```
//!
//! The intercept is the response mean. Each coordinate update is a
//! soft-thresholded partial residual correlation computed from the
//! precomputed Gram matrix, so one sweep costs `O(m²)` regardless of the
//! number of rows.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::io::parse_kv;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Convergence threshold on the largest coefficient change in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_sweeps: 100_000,
        }
    }
}

/// Per-feature standardization captured at fit time.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    /// Constant features are stored with `std = 1`.
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Scaler {
    fn fit(x: &[Vec<f64>]) -> Self {
        let n = x.len() as f64;
        let m = x[0].len();
        let mut mean = vec![0.0; m];
        for row in x {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= n);
        let mut var = vec![0.0; m];
        for row in x {
            for j in 0..m {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        let mut std = Vec::with_capacity(m);
        let mut constant = Vec::with_capacity(m);
        for j in 0..m {
            let sd = (var[j] / n).sqrt();
            let is_const = !(sd > 1e-12 * mean[j].abs().max(1.0));
            constant.push(is_const);
            std.push(if is_const { 1.0 } else { sd });
        }
        Self {
            mean,
            std,
            constant,
        }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (mu, sd))| (v - mu) / sd)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrModel {
    pub names: Vec<String>,
    /// Coefficients on standardized features, Ah per standard deviation.
    pub beta: Vec<f64>,
    /// Intercept, Ah.
    pub beta0: f64,
    pub lambda_reg: f64,
    /// L1 fraction of the penalty.
    pub mix: f64,
    pub scaler: Scaler,
}

/// Objective value after every sweep of a fit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    pub objective: Vec<f64>,
}

impl FitTrace {
    pub fn sweeps(&self) -> usize {
        self.objective.len()
    }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

fn validate(x: &[Vec<f64>], y: &[f64], lambda_reg: f64, mix: f64) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows vs {} responses",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidRegression(format!(
            "need at least 2 rows, got {}",
            x.len()
        )));
    }
    let m = x[0].len();
    if m == 0 {
        return Err(Error::InvalidRegression("no features".into()));
    }
    if let Some(i) = x.iter().position(|r| r.len() != m) {
        return Err(Error::DimensionMismatch(format!(
            "row {i} has {} features, expected {m}",
            x[i].len()
        )));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidRegression("non-finite input".into()));
    }
    if !(lambda_reg >= 0.0) || !lambda_reg.is_finite() {
        return Err(Error::InvalidRegression(format!(
            "lambda_reg must be finite and >= 0, got {lambda_reg}"
        )));
    }
    if !(0.0..=1.0).contains(&mix) {
        return Err(Error::InvalidRegression(format!(
            "mix must lie in [0, 1], got {mix}"
        )));
    }
    Ok(())
}

/// Fits with default options and generic feature names.
pub fn fit(x: &[Vec<f64>], y: &[f64], lambda_reg: f64, mix: f64) -> Result<EnrModel> {
    fit_with(x, y, lambda_reg, mix, &FitOptions::default()).map(|(m, _)| m)
}

pub fn fit_with(
    x: &[Vec<f64>],
    y: &[f64],
    lambda_reg: f64,
    mix: f64,
    opts: &FitOptions,
) -> Result<(EnrModel, FitTrace)> {
    validate(x, y, lambda_reg, mix)?;
    let n = x.len();
    let m = x[0].len();
    let nf = n as f64;
    let scaler = Scaler::fit(x);
    let y_mean = y.iter().sum::<f64>() / nf;

    // (1/n)·ZᵀZ, (1/n)·Zᵀy and (1/n)·yᵀy on standardized/centered data
    let mut gram = vec![0.0; m * m];
    let mut cov = vec![0.0; m];
    let mut zs = Vec::with_capacity(n);
    let mut ycs = Vec::with_capacity(n);
    for (row, &yi) in x.iter().zip(y) {
        let z = scaler.transform(row);
        let yc = yi - y_mean;
        for j in 0..m {
            if scaler.constant[j] {
                continue;
            }
            cov[j] += z[j] * yc;
            for k in j..m {
                if !scaler.constant[k] {
                    gram[j * m + k] += z[j] * z[k];
                }
            }
        }
        zs.push(z);
        ycs.push(yc);
    }
    for j in 0..m {
        for k in j..m {
            gram[j * m + k] /= nf;
            gram[k * m + j] = gram[j * m + k];
        }
        cov[j] /= nf;
    }

    let l1 = lambda_reg * mix;
    let l2 = lambda_reg * (1.0 - mix);
    // residual form; the Gram form loses precision to cancellation
    let objective = |b: &[f64]| {
        let sse: f64 = zs
            .iter()
            .zip(&ycs)
            .map(|(z, yc)| {
                let r = yc - z
                    .iter()
                    .zip(b)
                    .zip(&scaler.constant)
                    .filter(|(_, c)| !**c)
                    .map(|((zj, bj), _)| zj * bj)
                    .sum::<f64>();
                r * r
            })
            .sum();
        let fit_term = 0.5 * sse / nf;
        let ridge: f64 = b.iter().map(|v| v * v).sum();
        let lasso: f64 = b.iter().map(|v| v.abs()).sum();
        fit_term + 0.5 * l2 * ridge + l1 * lasso
    };

    let mut beta = vec![0.0; m];
    let mut gb = vec![0.0; m]; // gram · beta
    let mut trace = FitTrace::default();
    let mut converged = false;
    for _ in 0..opts.max_sweeps {
        let mut max_delta: f64 = 0.0;
        for j in 0..m {
            if scaler.constant[j] {
                continue;
            }
            let gjj = gram[j * m + j];
            let rho = cov[j] - gb[j] + gjj * beta[j];
            let new = soft_threshold(rho, l1) / (gjj + l2);
            let delta = new - beta[j];
            if delta != 0.0 {
                for k in 0..m {
                    gb[k] += gram[k * m + j] * delta;
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        trace.objective.push(objective(&beta));
        if max_delta < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::DidNotConverge {
            sweeps: opts.max_sweeps,
        });
    }

    let names = (1..=m).map(|j| format!("x{j}")).collect();
    Ok((
        EnrModel {
            names,
            beta,
            beta0: y_mean,
            lambda_reg,
            mix,
            scaler,
        },
        trace,
    ))
}

/// Grid search over `(lambda_reg, mix)` by contiguous k-fold RMSE, then a
/// refit on all rows. Rows are split in the order given, without shuffling;
/// ties keep the first grid point (lambda-major order).
pub fn fit_cv(
    x: &[Vec<f64>],
    y: &[f64],
    lambda_grid: &[f64],
    mix_grid: &[f64],
    folds: usize,
) -> Result<EnrModel> {
    if lambda_grid.is_empty() || mix_grid.is_empty() {
        return Err(Error::InvalidRegression("empty hyperparameter grid".into()));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows vs {} responses",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if folds < 2 || folds > n {
        return Err(Error::InvalidRegression(format!(
            "folds must lie in 2..={n}, got {folds}"
        )));
    }
    let grid: Vec<(f64, f64)> = lambda_grid
        .iter()
        .flat_map(|&l| mix_grid.iter().map(move |&a| (l, a)))
        .collect();

    let scores = grid
        .par_iter()
        .map(|&(lambda_reg, mix)| cv_rmse(x, y, lambda_reg, mix, folds))
        .collect::<Result<Vec<f64>>>()?;

    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    let (lambda_reg, mix) = grid[best];
    fit(x, y, lambda_reg, mix)
}

fn cv_rmse(x: &[Vec<f64>], y: &[f64], lambda_reg: f64, mix: f64, folds: usize) -> Result<f64> {
    let n = x.len();
    let mut total = 0.0;
    for f in 0..folds {
        let lo = f * n / folds;
        let hi = (f + 1) * n / folds;
        let train_x: Vec<Vec<f64>> = x[..lo].iter().chain(&x[hi..]).cloned().collect();
        let train_y: Vec<f64> = y[..lo].iter().chain(&y[hi..]).copied().collect();
        let model = fit(&train_x, &train_y, lambda_reg, mix)?;
        let mut sq = 0.0;
        for (row, &yi) in x[lo..hi].iter().zip(&y[lo..hi]) {
            let e = model.predict_row(row)? - yi;
            sq += e * e;
        }
        total += (sq / (hi - lo) as f64).sqrt();
    }
    Ok(total / folds as f64)
}

/// Regression estimate `Q̂^rg` for one feature vector.
pub fn predict(model: &EnrModel, x: &FeatureVector) -> Result<f64> {
    model.predict_row(&x.entries)
}

impl EnrModel {
    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.beta.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} coefficients",
                names.len(),
                self.beta.len()
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.beta.len() {
            return Err(Error::DimensionMismatch(format!(
                "feature vector has {} entries, model expects {}",
                row.len(),
                self.beta.len()
            )));
        }
        let mut acc = self.beta0;
        for (j, (&b, &x)) in self.beta.iter().zip(row).enumerate() {
            if b != 0.0 {
                acc += b * (x - self.scaler.mean[j]) / self.scaler.std[j];
            }
        }
        Ok(acc)
    }

    /// Slopes and intercept in original feature units.
    pub fn coefficients_original(&self) -> (Vec<f64>, f64) {
        let slopes: Vec<f64> = self
            .beta
            .iter()
            .zip(&self.scaler.std)
            .map(|(b, sd)| b / sd)
            .collect();
        let intercept = self.beta0
            - slopes
                .iter()
                .zip(&self.scaler.mean)
                .map(|(s, mu)| s * mu)
                .sum::<f64>();
        (slopes, intercept)
    }

    /// Flat `key = value` text, one feature block per coefficient.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# elastic-net model\n");
        out.push_str(&format!("lambda_reg = {}\n", self.lambda_reg));
        out.push_str(&format!("mix = {}\n", self.mix));
        out.push_str(&format!("beta0 = {}\n", self.beta0));
        out.push_str(&format!("n_features = {}\n", self.beta.len()));
        for j in 0..self.beta.len() {
            let i = j + 1;
            out.push_str(&format!("feature.{i} = {}\n", self.names[j]));
            out.push_str(&format!("mean.{i} = {}\n", self.scaler.mean[j]));
            out.push_str(&format!("std.{i} = {}\n", self.scaler.std[j]));
            out.push_str(&format!("constant.{i} = {}\n", self.scaler.constant[j]));
            out.push_str(&format!("beta.{i} = {}\n", self.beta[j]));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let kv = parse_kv(text)?;
        let get = |key: &str| -> Result<&str> {
            kv.get(key)
                .map(String::as_str)
                .ok_or_else(|| Error::InvalidConfig(format!("model file missing `{key}`")))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?
                .parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("model key `{key}`: {e}")))
        };
        let m: usize = get("n_features")?
            .parse()
            .map_err(|e| Error::InvalidConfig(format!("model key `n_features`: {e}")))?;
        let mut names = Vec::with_capacity(m);
        let mut mean = Vec::with_capacity(m);
        let mut std = Vec::with_capacity(m);
        let mut constant = Vec::with_capacity(m);
        let mut beta = Vec::with_capacity(m);
        for i in 1..=m {
            names.push(get(&format!("feature.{i}"))?.to_string());
            mean.push(num(&format!("mean.{i}"))?);
            std.push(num(&format!("std.{i}"))?);
            constant.push(get(&format!("constant.{i}"))? == "true");
            beta.push(num(&format!("beta.{i}"))?);
        }
        Ok(Self {
            names,
            beta,
            beta0: num("beta0")?,
            lambda_reg: num("lambda_reg")?,
            mix: num("mix")?,
            scaler: Scaler {
                mean,
                std,
                constant,
            },
        })
    }
}
