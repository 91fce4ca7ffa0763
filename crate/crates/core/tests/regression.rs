//! Elastic-net fits against closed-form and least-squares oracles.

mod common;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use soh_adapt::enr::{fit, fit_cv, predict};
use soh_adapt::features::FeatureVector;

use common::{random_problem, ridge_oracle, rng, standardize};

#[test]
fn unregularized_fit_is_least_squares() {
    let mut r = rng(10);
    let (x, y) = random_problem(&mut r, 10, 3);
    let m = fit(&x, &y, 0.0, 0.5).unwrap();
    // least squares with an explicit intercept column, in original units
    let a = DMatrix::from_fn(10, 4, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let b = DVector::from_column_slice(&y);
    let sol = a.clone().svd(true, true).solve(&b, 1e-14).unwrap();
    let (slopes, intercept) = m.coefficients_original();
    assert!((intercept - sol[0]).abs() < 1e-6);
    for j in 0..3 {
        assert!((slopes[j] - sol[j + 1]).abs() < 1e-6, "{j}: {} vs {}", slopes[j], sol[j + 1]);
    }
}

#[test]
fn pure_ridge_matches_closed_form() {
    let mut r = rng(11);
    for _ in 0..10 {
        let (x, y) = random_problem(&mut r, 30, 5);
        let l = r.random_range(0.05..1.0);
        let m = fit(&x, &y, l, 0.0).unwrap();
        // (ZᵀZ + nλI)⁻¹ Zᵀy on standardized, centered data
        let (z, yc) = standardize(&x, &y);
        let n = x.len() as f64;
        let lhs = z.transpose() * &z + DMatrix::identity(5, 5) * (n * l);
        let beta = lhs.lu().solve(&(z.transpose() * &yc)).unwrap();
        for j in 0..5 {
            assert!((m.beta[j] - beta[j]).abs() < 1e-6);
        }
        let oracle = ridge_oracle(&x, &y, l);
        let row = &x[3];
        let (zrow, _) = standardize(&x, &y);
        let want = y.iter().sum::<f64>() / n + (0..5).map(|j| zrow[(3, j)] * oracle[j]).sum::<f64>();
        assert!((m.predict_row(row).unwrap() - want).abs() < 1e-6);
    }
}

#[test]
fn single_point_grid_equals_fit() {
    let mut r = rng(12);
    let (x, y) = random_problem(&mut r, 30, 4);
    let cv = fit_cv(&x, &y, &[0.2], &[0.3], 3).unwrap();
    assert_eq!(cv, fit(&x, &y, 0.2, 0.3).unwrap());
    assert!(fit_cv(&x, &y, &[0.2], &[0.3], 31).is_err());
}

#[test]
fn noiseless_linear_data_is_reproduced() {
    let mut r = rng(13);
    let x: Vec<Vec<f64>> = (0..60)
        .map(|_| (0..3).map(|_| r.random_range(-5.0..5.0)).collect())
        .collect();
    let y: Vec<f64> = x.iter().map(|v| 30.0 + 0.5 * v[0] - 1.5 * v[1] + 0.25 * v[2]).collect();
    let m = fit_cv(&x, &y, &[1e-6, 0.1, 1.0], &[0.5], 4).unwrap();
    let mut sse = 0.0;
    for (row, &yi) in x.iter().zip(&y) {
        let fv = FeatureVector {
            ah: 0.0,
            entries: row.clone(),
        };
        let p = predict(&m, &fv).unwrap();
        assert!((p - yi).abs() < 1e-3);
        sse += (p - yi).powi(2);
    }
    assert!((sse / 60.0).sqrt() < 1e-3);
    assert_eq!(m.lambda_reg, 1e-6);
}

#[test]
fn zero_coefficients_predict_the_intercept() {
    let mut r = rng(14);
    let (x, y) = random_problem(&mut r, 20, 3);
    let m = fit(&x, &y, 1e6, 1.0).unwrap();
    assert!(m.beta.iter().all(|&b| b == 0.0));
    for row in [vec![0.0; 3], vec![1e3, -7.0, 2.0]] {
        assert_eq!(m.predict_row(&row).unwrap(), m.beta0);
    }
}
