//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use soh_adapt::cluster::{TrainingCell, TrainingSet};
use soh_adapt::trajectory::Trajectory;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Population-standardized design and centered response.
pub fn standardize(x: &[Vec<f64>], y: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let n = x.len();
    let m = x[0].len();
    let mut z = DMatrix::from_fn(n, m, |i, j| x[i][j]);
    for j in 0..m {
        let mut col = z.column_mut(j);
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / n as f64).sqrt();
        col /= sd;
    }
    let ybar = y.iter().sum::<f64>() / n as f64;
    (z, DVector::from_iterator(n, y.iter().map(|v| v - ybar)))
}

/// Minimizer of `(1/2n)‖y − Zβ‖² + (l2/2)‖β‖²`.
pub fn ridge_oracle(x: &[Vec<f64>], y: &[f64], l2: f64) -> Vec<f64> {
    let (z, yc) = standardize(x, y);
    let n = x.len() as f64;
    let m = z.ncols();
    let a = z.transpose() * &z / n + DMatrix::identity(m, m) * l2;
    let b = z.transpose() * yc / n;
    a.lu().solve(&b).expect("nonsingular").iter().cloned().collect()
}

/// Largest violation of the elastic-net optimality conditions.
pub fn kkt_residual(x: &[Vec<f64>], y: &[f64], beta: &[f64], lambda: f64, mix: f64) -> f64 {
    let (z, yc) = standardize(x, y);
    let n = x.len() as f64;
    let b = DVector::from_column_slice(beta);
    let grad = z.transpose() * (yc - &z * &b) / n;
    let l1 = lambda * mix;
    let l2 = lambda * (1.0 - mix);
    let mut worst: f64 = 0.0;
    for j in 0..beta.len() {
        let g = grad[j] - l2 * beta[j];
        let r = if beta[j] != 0.0 {
            (g - l1 * beta[j].signum()).abs()
        } else {
            (g.abs() - l1).max(0.0)
        };
        worst = worst.max(r);
    }
    worst
}

pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let coef: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let y = x
        .iter()
        .map(|r| 5.0 + r.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-0.5..0.5))
        .collect();
    (x, y)
}

/// Random training set on a shared grid plus a test trajectory sampled at a
/// strictly increasing subset of Ah points inside the grid.
pub struct RandomFleet {
    pub training: TrainingSet,
    pub test_ah: Vec<f64>,
    pub test_q: Vec<f64>,
}

pub fn random_fleet(rng: &mut ChaCha8Rng, k: usize, n: usize) -> RandomFleet {
    let grid: Vec<f64> = (0..=n + 1).map(|i| i as f64 * 10.0).collect();
    let cells = (0..k)
        .map(|c| {
            let level = rng.random_range(18.0..22.0);
            let slope = rng.random_range(-1e-3..1e-3);
            let q_age: Vec<f64> = grid
                .iter()
                .map(|a| level + slope * a + rng.random_range(-0.2..0.2))
                .collect();
            let q_bar: Vec<f64> = grid.iter().map(|_| rng.random_range(0.8..1.2)).collect();
            TrainingCell {
                cell_id: format!("c{c}"),
                q_age: Trajectory::from_vecs(grid.clone(), q_age).unwrap(),
                q_bar: Trajectory::from_vecs(grid.clone(), q_bar).unwrap(),
                q0: 30.0,
                features: Vec::new(),
            }
        })
        .collect();
    let test_ah: Vec<f64> = (1..=n).map(|i| i as f64 * 10.0 + rng.random_range(0.0..9.9)).collect();
    let test_q = test_ah
        .iter()
        .map(|a| 20.0 + 1e-4 * a + rng.random_range(-1.5..1.5))
        .collect();
    RandomFleet {
        training: TrainingSet::new(cells).unwrap(),
        test_ah,
        test_q,
    }
}

/// Linear interpolation on sorted abscissae, written independently of the
/// library.
pub fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut i = 0;
    while i + 2 < xs.len() && xs[i + 1] < x {
        i += 1;
    }
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

/// Classification by full recomputation of every prefix distance, then the
/// Ah-weighted share of wins.
pub fn brute_force(fleet: &RandomFleet) -> (Vec<usize>, Vec<Vec<f64>>, Vec<f64>) {
    let cells = fleet.training.cells();
    let refs: Vec<Vec<f64>> = cells
        .iter()
        .map(|c| {
            fleet
                .test_ah
                .iter()
                .map(|&a| interp(c.q_age.ah(), c.q_age.values(), a))
                .collect()
        })
        .collect();
    let mut s = Vec::new();
    let mut sq = Vec::new();
    for n in 1..=fleet.test_ah.len() {
        let sums: Vec<f64> = refs
            .iter()
            .map(|r| (0..n).map(|i| (fleet.test_q[i] - r[i]).powi(2)).sum())
            .collect();
        let mut best = 0;
        let mut min = f64::INFINITY;
        for (k, v) in sums.iter().enumerate() {
            if v.sqrt() < min {
                min = v.sqrt();
                best = k;
            }
        }
        s.push(best);
        sq.push(sums);
    }
    let total: f64 = fleet.test_ah.iter().sum();
    let lambda = (0..cells.len())
        .map(|k| {
            s.iter()
                .zip(&fleet.test_ah)
                .filter(|(sk, _)| **sk == k)
                .map(|(_, a)| a)
                .sum::<f64>()
                / total
        })
        .collect();
    (s, sq, lambda)
}
