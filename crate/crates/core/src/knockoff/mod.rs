//! Second-order model-X knockoffs.
//!
//! For `Z ~ N(μ, Σ)` and a diagonal `S` with `0 ⪯ S ⪯ 2Σ`, a knockoff row is
//! drawn from
//!
//! ```text
//! Z̃ | Z ~ N(μ + (I − SΣ⁻¹)(Z − μ),  2S − SΣ⁻¹S)
//! ```
//!
//! which makes `(Z, Z̃)` jointly Gaussian with covariance `[[Σ, Σ−S], [Σ−S, Σ]]`.
//! `S` is the equicorrelated choice. The mixture variant first draws a
//! component from the posterior given the row, then applies that
//! component's conditional.

mod diagnostics;
mod gaussian;
mod gmm;

pub use diagnostics::{diagnose_exchangeability, ExchangeabilityReport};
pub use gaussian::{compute_equicorrelated_s, fit_gaussian, GaussianKnockoff, EQUICORRELATED_SLACK};
pub use gmm::{fit_gmm, GmmOptions, MixtureComponent};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::series::MultivariateTimeSeries;

/// Fitted knockoff generator. `base` holds the single-Gaussian parameters;
/// `components` is set for the mixture variant.
#[derive(Debug, Clone)]
pub struct KnockoffModel {
    pub base: GaussianKnockoff,
    pub components: Option<Vec<MixtureComponent>>,
}

impl KnockoffModel {
    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn is_mixture(&self) -> bool {
        self.components.is_some()
    }

    /// Samples with the mixture sampler when components are present, else
    /// with the single-Gaussian sampler.
    pub fn sample(&self, series: &MultivariateTimeSeries, seed: &RngSeed) -> Result<MultivariateTimeSeries> {
        if self.is_mixture() {
            sample_gmm_knockoffs(self, series, seed)
        } else {
            sample_knockoffs(self, series, seed)
        }
    }
}

fn check_dim(model: &KnockoffModel, series: &MultivariateTimeSeries) -> Result<()> {
    if series.n_vars() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: series.n_vars(),
        });
    }
    Ok(())
}

fn standard_normal_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn rebuild(series: &MultivariateTimeSeries, values: DMatrix<f64>) -> Result<MultivariateTimeSeries> {
    let mut out = MultivariateTimeSeries::new_any_width(values, series.names().to_vec())?;
    out.sampling = series.sampling.clone();
    Ok(out)
}

/// Row-wise independent draws from the Gaussian knockoff conditional.
pub fn sample_knockoffs(
    model: &KnockoffModel,
    series: &MultivariateTimeSeries,
    seed: &RngSeed,
) -> Result<MultivariateTimeSeries> {
    check_dim(model, series)?;
    let mut rng = seed.rng();
    let n = model.dim();
    let mut out = DMatrix::zeros(series.len(), n);
    for t in 0..series.len() {
        let z = series.values().row(t).transpose();
        let g = standard_normal_vector(&mut rng, n);
        out.set_row(t, &model.base.conditional_draw(&z, &g).transpose());
    }
    rebuild(series, out)
}

/// Per row: draw a component from its posterior given the row, then apply
/// that component's knockoff conditional.
pub fn sample_gmm_knockoffs(
    model: &KnockoffModel,
    series: &MultivariateTimeSeries,
    seed: &RngSeed,
) -> Result<MultivariateTimeSeries> {
    check_dim(model, series)?;
    let components = model
        .components
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("knockoff model has no mixture components".into()))?;
    let mut rng = seed.rng();
    let n = model.dim();
    let mut out = DMatrix::zeros(series.len(), n);
    let mut log_post = vec![0.0; components.len()];
    for t in 0..series.len() {
        let z = series.values().row(t).transpose();
        for (lp, c) in log_post.iter_mut().zip(components) {
            *lp = c.weight.ln() + c.params.log_density(&z);
        }
        let k = draw_from_log_weights(&mut rng, &log_post);
        let g = standard_normal_vector(&mut rng, n);
        out.set_row(t, &components[k].params.conditional_draw(&z, &g).transpose());
    }
    rebuild(series, out)
}

fn draw_from_log_weights<R: Rng>(rng: &mut R, log_w: &[f64]) -> usize {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, wk) in w.iter().enumerate() {
        if u < *wk {
            return k;
        }
        u -= wk;
    }
    w.len() - 1
}
