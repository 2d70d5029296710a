use nalgebra::DMatrix;
use serde::Serialize;

use super::KnockoffModel;
use crate::error::{Error, Result};
use crate::series::MultivariateTimeSeries;
use crate::stats::{covariance_matrix, cross_covariance};

/// Second-moment check of pairwise exchangeability, on the scale where
/// `Σ` is a correlation matrix.
#[derive(Debug, Clone, Serialize)]
pub struct ExchangeabilityReport {
    /// `max |Cov(Z̃) − Σ|`.
    pub knockoff_cov_deviation: f64,
    /// `max |Cov(Z_i, Z̃_j) − Σ_ij|` over `i ≠ j`.
    pub cross_cov_deviation: f64,
    /// Per variable `(observed Cov(Z_i, Z̃_i), target Σ_ii − S_ii)`.
    pub self_cov: Vec<(f64, f64)>,
    pub self_cov_deviation: f64,
    pub samples: usize,
}

impl ExchangeabilityReport {
    pub fn max_deviation(&self) -> f64 {
        self.knockoff_cov_deviation
            .max(self.cross_cov_deviation)
            .max(self.self_cov_deviation)
    }

    pub fn flagged(&self, tolerance: f64) -> bool {
        self.max_deviation() > tolerance
    }

    /// Key-value table for terminal output.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<28} {}\n", "samples", self.samples));
        out.push_str(&format!("{:<28} {:.4}\n", "cov(knockoff) deviation", self.knockoff_cov_deviation));
        out.push_str(&format!("{:<28} {:.4}\n", "cross-cov deviation", self.cross_cov_deviation));
        out.push_str(&format!("{:<28} {:.4}\n", "self-cov deviation", self.self_cov_deviation));
        for (i, (obs, target)) in self.self_cov.iter().enumerate() {
            out.push_str(&format!("{:<28} {obs:.4} (target {target:.4})\n", format!("self-cov[{i}]")));
        }
        out
    }
}

pub fn diagnose_exchangeability(
    series: &MultivariateTimeSeries,
    knockoffs: &MultivariateTimeSeries,
    model: &KnockoffModel,
) -> Result<ExchangeabilityReport> {
    let n = model.dim();
    if series.n_vars() != n || knockoffs.n_vars() != n || series.len() != knockoffs.len() {
        return Err(Error::DimensionMismatch {
            expected: series.len(),
            got: knockoffs.len(),
        });
    }
    let base = &model.base;
    let sd: Vec<f64> = (0..n).map(|i| base.cov[(i, i)].sqrt()).collect();
    let scale = |m: &DMatrix<f64>| {
        DMatrix::from_fn(m.nrows(), n, |t, i| (m[(t, i)] - base.mean[i]) / sd[i])
    };
    let z = scale(series.values());
    let zk = scale(knockoffs.values());
    let corr = DMatrix::from_fn(n, n, |i, j| base.cov[(i, j)] / (sd[i] * sd[j]));

    let cov_k = covariance_matrix(&zk);
    let cross = cross_covariance(&z, &zk);
    let knockoff_cov_deviation = (&cov_k - &corr).abs().max();
    let mut cross_cov_deviation: f64 = 0.0;
    let mut self_cov = Vec::with_capacity(n);
    let mut self_cov_deviation: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                cross_cov_deviation = cross_cov_deviation.max((cross[(i, j)] - corr[(i, j)]).abs());
            }
        }
        let target = 1.0 - base.s[i] / base.cov[(i, i)];
        self_cov_deviation = self_cov_deviation.max((cross[(i, i)] - target).abs());
        self_cov.push((cross[(i, i)], target));
    }
    Ok(ExchangeabilityReport {
        knockoff_cov_deviation,
        cross_cov_deviation,
        self_cov,
        self_cov_deviation,
        samples: series.len(),
    })
}
