//! Linear VAR Granger-causality baseline.
//!
//! Each equation is fitted by ordinary least squares on an intercept and
//! `q` lags of every variable. `i → j` is declared when dropping all lags
//! of `i` from `j`'s equation raises the residual sum of squares enough for
//! the nested-model F-test to reject.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::graph::{off_diagonal_pairs, CausalGraph};
use crate::series::MultivariateTimeSeries;

#[derive(Debug, Clone)]
pub struct VarModel {
    pub order: usize,
    /// `coefficients[k][(j, i)]`: effect of `z_i` at lag `k + 1` on `z_j`.
    pub coefficients: Vec<DMatrix<f64>>,
    pub intercept: DVector<f64>,
    pub residual_cov: DMatrix<f64>,
    pub rss: Vec<f64>,
    /// Standard errors laid out like `coefficients`.
    pub std_errors: Vec<DMatrix<f64>>,
    pub n_obs: usize,
}

struct OlsFit {
    beta: DVector<f64>,
    residuals: DVector<f64>,
    rss: f64,
    std_errors: DVector<f64>,
}

/// Lagged design: column 0 is the intercept, then lag `k` of variable `i`
/// at column `1 + (k − 1)·N + i`. Columns listed in `exclude` are dropped.
fn design(series: &MultivariateTimeSeries, order: usize, exclude_var: Option<usize>) -> DMatrix<f64> {
    let (r, n) = (series.len(), series.n_vars());
    let rows = r - order;
    let cols: Vec<(usize, usize)> = (1..=order)
        .flat_map(|k| (0..n).map(move |i| (k, i)))
        .filter(|&(_, i)| Some(i) != exclude_var)
        .collect();
    DMatrix::from_fn(rows, cols.len() + 1, |row, c| {
        if c == 0 {
            1.0
        } else {
            let (k, i) = cols[c - 1];
            series.get(row + order - k, i)
        }
    })
}

fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (rows, cols) = x.shape();
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(k) = r.diagonal().iter().position(|v| v.abs() <= 1e-10 * scale) {
        return Err(Error::RankDeficient(format!("column {k} of {cols} is collinear")));
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient("triangular solve failed".into()))?;
    let residuals = y - x * &beta;
    let rss = residuals.norm_squared();
    let sigma2 = rss / (rows - cols) as f64;
    let r_inv = r
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("R not invertible".into()))?;
    // (XᵀX)⁻¹ = R⁻¹R⁻ᵀ; only its diagonal is needed.
    let std_errors = DVector::from_fn(cols, |c, _| (sigma2 * r_inv.row(c).norm_squared()).sqrt());
    Ok(OlsFit {
        beta,
        residuals,
        rss,
        std_errors,
    })
}

fn check_length(series: &MultivariateTimeSeries, order: usize) -> Result<()> {
    let (r, n) = (series.len(), series.n_vars());
    if order == 0 {
        return Err(Error::InvalidParameter("VAR order must be at least 1".into()));
    }
    if r <= order * n + order + 1 {
        return Err(Error::InsufficientData(format!(
            "VAR({order}) on {n} variables needs more than {} rows, got {r}",
            order * n + order + 1
        )));
    }
    Ok(())
}

pub fn fit_var(series: &MultivariateTimeSeries, order: usize) -> Result<VarModel> {
    check_length(series, order)?;
    let n = series.n_vars();
    let x = design(series, order, None);
    let t = x.nrows();
    let mut coefficients = vec![DMatrix::zeros(n, n); order];
    let mut std_errors = vec![DMatrix::zeros(n, n); order];
    let mut intercept = DVector::zeros(n);
    let mut residuals = DMatrix::zeros(t, n);
    let mut rss = Vec::with_capacity(n);
    for j in 0..n {
        let y = DVector::from_fn(t, |row, _| series.get(row + order, j));
        let fit = ols(&x, &y)?;
        intercept[j] = fit.beta[0];
        for k in 0..order {
            for i in 0..n {
                coefficients[k][(j, i)] = fit.beta[1 + k * n + i];
                std_errors[k][(j, i)] = fit.std_errors[1 + k * n + i];
            }
        }
        residuals.set_column(j, &fit.residuals);
        rss.push(fit.rss);
    }
    let dof = (t - (order * n + 1)) as f64;
    let residual_cov = residuals.transpose() * &residuals / dof;
    Ok(VarModel {
        order,
        coefficients,
        intercept,
        residual_cov,
        rss,
        std_errors,
        n_obs: t,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GrangerTest {
    pub source: usize,
    pub target: usize,
    pub f_statistic: f64,
    pub p_value: f64,
    pub rss_full: f64,
    pub rss_restricted: f64,
    pub decision: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrangerReport {
    pub variables: Vec<String>,
    pub method: String,
    pub adjacency: Vec<Vec<u8>>,
    pub edges: Vec<GrangerTest>,
    pub order: usize,
    pub alpha: f64,
}

impl GrangerReport {
    pub fn graph(&self) -> CausalGraph {
        CausalGraph::from_matrix(&self.adjacency).expect("built from a graph")
    }
}

/// Nested-model F-test for every ordered pair.
pub fn granger_graph(series: &MultivariateTimeSeries, order: usize, alpha: f64) -> Result<(CausalGraph, GrangerReport)> {
    check_length(series, order)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1)")));
    }
    let n = series.n_vars();
    let full_x = design(series, order, None);
    let t = full_x.nrows();
    let df2 = t - order * n - 1;
    let fisher = FisherSnedecor::new(order as f64, df2 as f64)
        .map_err(|e| Error::InvalidParameter(format!("F distribution: {e}")))?;
    let targets: Vec<DVector<f64>> = (0..n)
        .map(|j| DVector::from_fn(t, |row, _| series.get(row + order, j)))
        .collect();
    let full_rss: Vec<f64> = targets.iter().map(|y| ols(&full_x, y).map(|f| f.rss)).collect::<Result<_>>()?;
    let restricted: Vec<DMatrix<f64>> = (0..n).map(|i| design(series, order, Some(i))).collect();

    let mut graph = CausalGraph::empty(n);
    let mut edges = Vec::with_capacity(n * (n - 1));
    for (i, j) in off_diagonal_pairs(n) {
        let rss_r = ols(&restricted[i], &targets[j])?.rss;
        let rss_f = full_rss[j];
        let f = (((rss_r - rss_f) / order as f64) / (rss_f / df2 as f64)).max(0.0);
        let p_value = if rss_f == 0.0 { 0.0 } else { fisher.sf(f) };
        let decision = p_value < alpha;
        graph.set(i, j, decision);
        edges.push(GrangerTest {
            source: i,
            target: j,
            f_statistic: f,
            p_value,
            rss_full: rss_f,
            rss_restricted: rss_r,
            decision,
        });
    }
    let report = GrangerReport {
        variables: series.names().to_vec(),
        method: "var-gc".into(),
        adjacency: graph.to_matrix(),
        edges,
        order,
        alpha,
    };
    Ok((graph, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn var1(r: usize, coupling: f64, seed: u64) -> MultivariateTimeSeries {
        let mut rng = RngSeed::new(seed, "var").rng();
        let mut a = vec![0.0; r];
        let mut b = vec![0.0; r];
        for t in 1..r {
            a[t] = 0.5 * a[t - 1] + rng.sample::<f64, _>(StandardNormal);
            b[t] = coupling * a[t - 1] + rng.sample::<f64, _>(StandardNormal);
        }
        MultivariateTimeSeries::from_columns(&[a, b]).unwrap()
    }

    #[test]
    fn recovers_var1_coefficient() {
        let s = var1(5000, 0.8, 1);
        let m = fit_var(&s, 1).unwrap();
        assert!((m.coefficients[0][(0, 0)] - 0.5).abs() < 0.05);
        assert!((m.coefficients[0][(1, 0)] - 0.8).abs() < 0.05);
        assert!(m.coefficients[0][(0, 1)].abs() < 0.05);
        assert!(m.residual_cov[(0, 0)] > 0.0);
    }

    #[test]
    fn white_noise_coefficients_near_zero() {
        let mut rng = RngSeed::new(2, "wn").rng();
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..3000).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let s = MultivariateTimeSeries::from_columns(&cols).unwrap();
        let m = fit_var(&s, 2).unwrap();
        for (c, se) in m.coefficients.iter().zip(&m.std_errors) {
            for (v, e) in c.iter().zip(se.iter()) {
                assert!(v.abs() < 4.0 * e, "{v} vs se {e}");
            }
        }
    }

    #[test]
    fn too_short_and_rank_deficient() {
        let s = var1(12, 0.8, 3);
        assert!(matches!(fit_var(&s, 5), Err(Error::InsufficientData(_))));
        let c: Vec<f64> = (0..100).map(|t| (t as f64 * 0.37).sin()).collect();
        let s = MultivariateTimeSeries::from_columns(&[c.clone(), c]).unwrap();
        assert!(matches!(fit_var(&s, 1), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn detects_lagged_link() {
        let s = var1(2000, 0.8, 4);
        let (g, rep) = granger_graph(&s, 10, 0.05).unwrap();
        assert!(g.has_edge(0, 1));
        let e = rep.edges.iter().find(|e| e.source == 0 && e.target == 1).unwrap();
        assert!(e.p_value < 1e-3);
        for e in &rep.edges {
            assert!(e.f_statistic >= 0.0);
            assert!(e.rss_restricted >= e.rss_full - 1e-9);
        }
    }

    #[test]
    fn refit_is_bit_identical() {
        let s = var1(500, 0.3, 5);
        let a = granger_graph(&s, 3, 0.05).unwrap().1;
        let b = granger_graph(&s, 3, 0.05).unwrap().1;
        assert_eq!(a.edges, b.edges);
    }
}
