//! Small descriptive-statistics helpers shared across modules.

use nalgebra::DMatrix;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with the `n − 1` denominator.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Pearson correlation; 0 when either input is constant.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (vx, vy) = (variance(x), variance(y));
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    covariance(x, y) / (vx * vy).sqrt()
}

/// Column covariance matrix of an `r × N` matrix (`n − 1` denominator).
pub fn covariance_matrix(values: &DMatrix<f64>) -> DMatrix<f64> {
    let r = values.nrows();
    let means = values.row_mean();
    let mut centered = values.clone();
    for mut row in centered.row_iter_mut() {
        row -= &means;
    }
    let mut cov = centered.transpose() * &centered / (r as f64 - 1.0);
    cov = (&cov + cov.transpose()) * 0.5;
    cov
}

/// Cross-covariance `Cov(X_i, Y_j)` between the columns of two equally
/// long matrices.
pub fn cross_covariance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let r = x.nrows();
    let (mx, my) = (x.row_mean(), y.row_mean());
    let mut cx = x.clone();
    for mut row in cx.row_iter_mut() {
        row -= &mx;
    }
    let mut cy = y.clone();
    for mut row in cy.row_iter_mut() {
        row -= &my;
    }
    cx.transpose() * cy / (r as f64 - 1.0)
}
