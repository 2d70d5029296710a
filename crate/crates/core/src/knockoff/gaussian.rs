use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use super::KnockoffModel;
use crate::error::{Error, Result};
use crate::series::MultivariateTimeSeries;
use crate::stats;

/// Slack `ε` in `s = min(1, 2λ_min)·(1 − ε)`, keeping `2Σ − S` strictly
/// positive definite.
pub const EQUICORRELATED_SLACK: f64 = 1e-6;

const MIN_EIGENVALUE: f64 = 1e-8;
const RIDGE_SCALE: f64 = 1e-6;
const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-4;

/// Gaussian knockoff parameters with the conditional mean factor
/// `A = I − SΣ⁻¹` and conditional covariance `V = 2S − SΣ⁻¹S` precomputed.
#[derive(Debug, Clone)]
pub struct GaussianKnockoff {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Diagonal of `S`.
    pub s: DVector<f64>,
    pub a: DMatrix<f64>,
    pub v: DMatrix<f64>,
    /// Smallest eigenvalue of `V` before any jitter.
    pub v_min_eigenvalue: f64,
    /// Jitter added to `V`'s diagonal to obtain a Cholesky factor (0 if none).
    pub v_jitter: f64,
    v_chol: DMatrix<f64>,
    cov_chol: Cholesky<f64, Dyn>,
}

impl GaussianKnockoff {
    /// Builds the model from `μ`, `Σ` and the diagonal of `S`.
    pub fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>, s: DVector<f64>) -> Result<Self> {
        let n = cov.nrows();
        if mean.len() != n || s.len() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: mean.len(),
            });
        }
        let cov_chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::NotPositiveDefinite("covariance has no Cholesky factor".into()))?;
        let cov_inv = cov_chol.inverse();
        let s_mat = DMatrix::from_diagonal(&s);
        let s_cinv = &s_mat * &cov_inv;
        let a = DMatrix::identity(n, n) - &s_cinv;
        let mut v = &s_mat * 2.0 - &s_cinv * &s_mat;
        v = (&v + v.transpose()) * 0.5;
        let v_min_eigenvalue = SymmetricEigen::new(v.clone()).eigenvalues.min();
        let (v_chol, v_jitter) = cholesky_with_jitter(&v)?;
        Ok(Self {
            mean,
            cov,
            s,
            a,
            v,
            v_min_eigenvalue,
            v_jitter,
            v_chol,
            cov_chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Lower Cholesky factor of `V` (jittered if needed).
    pub fn v_cholesky(&self) -> &DMatrix<f64> {
        &self.v_chol
    }

    /// `μ + A(z − μ) + chol(V)·g`.
    pub fn conditional_draw(&self, z: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
        &self.mean + &self.a * (z - &self.mean) + &self.v_chol * g
    }

    /// Log of the `N(μ, Σ)` density at `z`.
    pub fn log_density(&self, z: &DVector<f64>) -> f64 {
        let d = z - &self.mean;
        let sol = self.cov_chol.l().solve_lower_triangular(&d).expect("nonsingular factor");
        let log_det: f64 = self.cov_chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        -0.5 * (sol.norm_squared() + log_det + self.dim() as f64 * std::f64::consts::TAU.ln())
    }
}

/// Cholesky of `m`, adding `1e-8·I` and escalating ×10 up to `1e-4·I` if the
/// plain factorization fails.
pub(crate) fn cholesky_with_jitter(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok((c.l(), 0.0));
    }
    let n = m.nrows();
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        if let Some(c) = Cholesky::new(m + DMatrix::identity(n, n) * jitter) {
            return Ok((c.l(), jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::NotPositiveDefinite(format!(
        "no Cholesky factor after jitter up to {JITTER_MAX:e}"
    )))
}

/// Adds `λI` with `λ = 1e-6·trace(Σ)/N` when the smallest eigenvalue is
/// below `1e-8`.
pub(crate) fn regularize_covariance(cov: &mut DMatrix<f64>) {
    let n = cov.nrows();
    let min_eig = SymmetricEigen::new(cov.clone()).eigenvalues.min();
    if min_eig < MIN_EIGENVALUE {
        let ridge = RIDGE_SCALE * cov.trace() / n as f64;
        for i in 0..n {
            cov[(i, i)] += ridge;
        }
    }
}

/// Equicorrelated knockoff diagonal. On the correlation scale
/// `s = min(1, 2λ_min(C))·(1 − ε)`, mapped back as `S_ii = s·Σ_ii`.
pub fn compute_equicorrelated_s(cov: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = cov.nrows();
    if cov.ncols() != n || n == 0 {
        return Err(Error::NotPositiveDefinite("covariance must be square and non-empty".into()));
    }
    let diag = cov.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::NotPositiveDefinite("non-positive variance on the diagonal".into()));
    }
    let inv_sd = diag.map(|d| 1.0 / d.sqrt());
    let corr = DMatrix::from_fn(n, n, |i, j| cov[(i, j)] * inv_sd[i] * inv_sd[j]);
    let corr = (&corr + corr.transpose()) * 0.5;
    let lambda_min = SymmetricEigen::new(corr).eigenvalues.min();
    if !(lambda_min > 0.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest correlation eigenvalue {lambda_min:e}"
        )));
    }
    let s = (2.0 * lambda_min).min(1.0) * (1.0 - EQUICORRELATED_SLACK);
    Ok(diag.map(|d| s * d))
}

/// Fits `μ`, `Σ` (ridge-regularized when near singular) and the
/// equicorrelated `S`, treating rows as exchangeable samples.
pub fn fit_gaussian(series: &MultivariateTimeSeries) -> Result<KnockoffModel> {
    let (r, n) = (series.len(), series.n_vars());
    if r <= n {
        return Err(Error::InsufficientData(format!(
            "knockoff fit needs more rows than variables ({r} <= {n})"
        )));
    }
    let mean = DVector::from_vec(series.column_means());
    let mut cov = stats::covariance_matrix(series.values());
    regularize_covariance(&mut cov);
    let s = compute_equicorrelated_s(&cov)?;
    Ok(KnockoffModel {
        base: GaussianKnockoff::from_parts(mean, cov, s)?,
        components: None,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Rows from `N(0, Σ)` with unit variances and equal correlation `rho`.
    pub(crate) fn correlated_gaussian(n: usize, rho: f64, r: usize, seed: u64) -> MultivariateTimeSeries {
        let cov = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho });
        let l = Cholesky::new(cov).unwrap().l();
        let mut rng = RngSeed::new(seed, "gauss").rng();
        let rows: Vec<Vec<f64>> = (0..r)
            .map(|_| {
                let g = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                (&l * g).iter().copied().collect()
            })
            .collect();
        MultivariateTimeSeries::from_rows(&rows).unwrap()
    }

    fn corr2(rho: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])
    }

    #[test]
    fn equicorrelated_identity() {
        let s = compute_equicorrelated_s(&DMatrix::identity(3, 3)).unwrap();
        for v in s.iter() {
            assert_eq!(*v, 1.0 - 1e-6);
        }
    }

    #[test]
    fn equicorrelated_two_by_two() {
        // λ_min of [[1, ρ], [ρ, 1]] is 1 − ρ.
        let s = compute_equicorrelated_s(&corr2(0.8)).unwrap();
        assert!((s[0] - 0.4 * (1.0 - 1e-6)).abs() < 1e-12);
        let s = compute_equicorrelated_s(&corr2(0.3)).unwrap();
        assert!((s[0] - (1.0 - 1e-6)).abs() < 1e-12);
    }

    #[test]
    fn equicorrelated_scales_with_variances() {
        let cov = DMatrix::from_row_slice(2, 2, &[4.0, 0.8 * 2.0 * 3.0, 0.8 * 2.0 * 3.0, 9.0]);
        let s = compute_equicorrelated_s(&cov).unwrap();
        let base = 0.4 * (1.0 - 1e-6);
        assert!((s[0] - 4.0 * base).abs() < 1e-10 && (s[1] - 9.0 * base).abs() < 1e-10);
        // 2Σ − S stays positive definite.
        let m = &cov * 2.0 - DMatrix::from_diagonal(&s);
        assert!(SymmetricEigen::new(m).eigenvalues.min() > 0.0);
    }

    #[test]
    fn rejects_non_positive_definite() {
        assert!(compute_equicorrelated_s(&corr2(1.0)).is_err());
        assert!(compute_equicorrelated_s(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
    }

    #[test]
    fn fit_on_standard_normal_data() {
        let data = correlated_gaussian(3, 0.0, 50_000, 11);
        let m = fit_gaussian(&data).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((m.base.cov[(i, j)] - target).abs() < 0.05);
            }
            assert!((m.base.s[i] - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn scalar_fit() {
        let cols = vec![(0..200).map(|t| ((t * 37 % 101) as f64).sin() * 2.0).collect::<Vec<_>>()];
        let data = MultivariateTimeSeries::from_columns(&cols).unwrap();
        let m = fit_gaussian(&data).unwrap();
        let var = m.base.cov[(0, 0)];
        assert!((m.base.s[0] - var * (1.0 - 1e-6)).abs() < 1e-12);
        let v = 2.0 * m.base.s[0] - m.base.s[0].powi(2) / var;
        assert!(v > 0.0);
        assert!((m.base.v[(0, 0)] - v).abs() < 1e-10);
    }

    #[test]
    fn too_few_rows() {
        let data = MultivariateTimeSeries::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(fit_gaussian(&data), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn near_singular_covariance_is_ridged() {
        // Second column is an exact copy of the first.
        let x: Vec<f64> = (0..300).map(|t| ((t * 7919 % 1009) as f64 / 1009.0) - 0.5).collect();
        let y: Vec<f64> = (0..300).map(|t| ((t * 104_729 % 997) as f64 / 997.0) - 0.5).collect();
        let data = MultivariateTimeSeries::from_columns(&[x.clone(), x, y]).unwrap();
        let m = fit_gaussian(&data).unwrap();
        assert!(m.base.v_min_eigenvalue >= -1e-8);
        assert!(m.base.s.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn conditional_matrices_match_definition() {
        let data = correlated_gaussian(4, 0.5, 2000, 3);
        let m = fit_gaussian(&data).unwrap().base;
        let s = DMatrix::from_diagonal(&m.s);
        let inv = m.cov.clone().try_inverse().unwrap();
        let a = DMatrix::identity(4, 4) - &s * &inv;
        let v = &s * 2.0 - &s * &inv * &s;
        assert!((a - &m.a).abs().max() < 1e-9);
        assert!((v - &m.v).abs().max() < 1e-9);
        // Joint covariance [[Σ, Σ−S], [Σ−S, Σ]]: A Σ Aᵀ + V = Σ and Σ Aᵀ = Σ − S.
        let cov_ko = &m.a * &m.cov * m.a.transpose() + &m.v;
        assert!((cov_ko - &m.cov).abs().max() < 1e-9);
        let cross = &m.cov * m.a.transpose();
        assert!((cross - (&m.cov - &s)).abs().max() < 1e-9);
    }

    #[test]
    fn jitter_escalation() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (_, jitter) = cholesky_with_jitter(&m).unwrap();
        assert!((1e-8..=1e-4).contains(&jitter));
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(cholesky_with_jitter(&bad).is_err());
    }
}
