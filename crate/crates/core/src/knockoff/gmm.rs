use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::index::sample as sample_indices;

use super::gaussian::{compute_equicorrelated_s, fit_gaussian, regularize_covariance, GaussianKnockoff};
use super::KnockoffModel;
use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::series::MultivariateTimeSeries;

#[derive(Debug, Clone)]
pub struct MixtureComponent {
    pub weight: f64,
    pub params: GaussianKnockoff,
}

#[derive(Debug, Clone, Copy)]
pub struct GmmOptions {
    pub max_iter: usize,
    /// Convergence threshold on the mean per-row log-likelihood.
    pub tol: f64,
    pub kmeans_iter: usize,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-6,
            kmeans_iter: 20,
        }
    }
}

/// Fits a `k`-component full-covariance mixture by EM and attaches
/// per-component equicorrelated knockoff parameters.
pub fn fit_gmm(series: &MultivariateTimeSeries, k: usize, seed: &RngSeed) -> Result<KnockoffModel> {
    fit_gmm_with(series, k, seed, &GmmOptions::default())
}

pub fn fit_gmm_with(
    series: &MultivariateTimeSeries,
    k: usize,
    seed: &RngSeed,
    options: &GmmOptions,
) -> Result<KnockoffModel> {
    let (r, n) = (series.len(), series.n_vars());
    if k == 0 {
        return Err(Error::InvalidParameter("mixture needs at least one component".into()));
    }
    if r <= k * n {
        return Err(Error::InsufficientData(format!(
            "mixture fit needs more than K·N = {} rows, got {r}",
            k * n
        )));
    }
    let base = fit_gaussian(series)?.base;
    let rows: Vec<DVector<f64>> = (0..r).map(|t| series.values().row(t).transpose()).collect();

    let labels = kmeans_labels(&rows, k, seed, options.kmeans_iter);
    let mut resp = DMatrix::<f64>::zeros(r, k);
    for (t, &l) in labels.iter().enumerate() {
        resp[(t, l)] = 1.0;
    }
    let mut params = m_step(&rows, &resp)?;
    let mut prev_ll = f64::NEG_INFINITY;
    for _ in 0..options.max_iter {
        let ll = e_step(&rows, &params, &mut resp)?;
        params = m_step(&rows, &resp)?;
        if (ll - prev_ll).abs() < options.tol {
            break;
        }
        prev_ll = ll;
    }

    let components = params
        .into_iter()
        .map(|(weight, mean, cov)| {
            let s = compute_equicorrelated_s(&cov)?;
            Ok(MixtureComponent {
                weight,
                params: GaussianKnockoff::from_parts(mean, cov, s)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KnockoffModel {
        base,
        components: Some(components),
    })
}

type ComponentParams = (f64, DVector<f64>, DMatrix<f64>);

fn kmeans_labels(rows: &[DVector<f64>], k: usize, seed: &RngSeed, iters: usize) -> Vec<usize> {
    let mut rng = seed.rng();
    let mut centers: Vec<DVector<f64>> = sample_indices(&mut rng, rows.len(), k)
        .into_iter()
        .map(|t| rows[t].clone())
        .collect();
    let mut labels = vec![0usize; rows.len()];
    for _ in 0..iters.max(1) {
        let mut changed = false;
        for (t, x) in rows.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| (x - &centers[a]).norm_squared().total_cmp(&(x - &centers[b]).norm_squared()))
                .unwrap();
            changed |= labels[t] != best;
            labels[t] = best;
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&DVector<f64>> = rows.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(x, _)| x).collect();
            // empty cluster keeps its previous center
            if !members.is_empty() {
                *center = members.iter().fold(DVector::zeros(x_dim(rows)), |acc, x| acc + *x) / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

fn x_dim(rows: &[DVector<f64>]) -> usize {
    rows[0].len()
}

fn m_step(rows: &[DVector<f64>], resp: &DMatrix<f64>) -> Result<Vec<ComponentParams>> {
    let (r, k) = resp.shape();
    let n = x_dim(rows);
    (0..k)
        .map(|c| {
            let nk: f64 = resp.column(c).sum();
            if !(nk > n as f64 * 1e-3) {
                return Err(Error::EmFailure(format!("component {c} collapsed (effective size {nk:.3e})")));
            }
            let mean = rows
                .iter()
                .enumerate()
                .fold(DVector::zeros(n), |acc, (t, x)| acc + x * resp[(t, c)])
                / nk;
            let mut cov = DMatrix::zeros(n, n);
            for (t, x) in rows.iter().enumerate() {
                let d = x - &mean;
                cov += &d * d.transpose() * resp[(t, c)];
            }
            cov /= nk;
            cov = (&cov + cov.transpose()) * 0.5;
            regularize_covariance(&mut cov);
            if Cholesky::new(cov.clone()).is_none() {
                return Err(Error::EmFailure(format!("component {c} covariance singular after ridge")));
            }
            Ok((nk / r as f64, mean, cov))
        })
        .collect()
}

/// Fills responsibilities in place and returns the mean log-likelihood.
fn e_step(rows: &[DVector<f64>], params: &[ComponentParams], resp: &mut DMatrix<f64>) -> Result<f64> {
    let n = x_dim(rows);
    let log_norm = n as f64 * std::f64::consts::TAU.ln();
    let factors: Vec<(f64, &DVector<f64>, DMatrix<f64>, f64)> = params
        .iter()
        .map(|(w, mean, cov)| {
            let chol = Cholesky::new(cov.clone()).ok_or_else(|| Error::EmFailure("covariance lost definiteness".into()))?;
            let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            Ok((w.ln() - 0.5 * (log_det + log_norm), mean, chol.l(), 0.0))
        })
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut logs = vec![0.0; params.len()];
    for (t, x) in rows.iter().enumerate() {
        for (c, (offset, mean, l, _)) in factors.iter().enumerate() {
            let sol = l.solve_lower_triangular(&(x - *mean)).expect("nonsingular");
            logs[c] = offset - 0.5 * sol.norm_squared();
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        let lse = max + sum.ln();
        for (c, l) in logs.iter().enumerate() {
            resp[(t, c)] = (l - lse).exp();
        }
        total += lse;
    }
    Ok(total / rows.len() as f64)
}
