use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ks::{ks_two_sample, KsResult};
use crate::error::{Error, Result};
use crate::forecaster::{self, ForecastConfig, ForecastModel};
use crate::graph::{off_diagonal_pairs, CausalGraph};
use crate::interventions::{self, InterventionKind};
use crate::knockoff::{fit_gaussian, fit_gmm, KnockoffModel};
use crate::rng::RngSeed;
use crate::series::{split_train_forecast, MultivariateTimeSeries, TrainForecastSplit};

/// Overlapping forecast windows over a residual series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowScheme {
    pub length: usize,
    pub step: usize,
}

impl Default for WindowScheme {
    fn default() -> Self {
        Self { length: 25, step: 10 }
    }
}

impl WindowScheme {
    pub const LENGTH_RANGE: (usize, usize) = (20, 30);
    pub const STEP_RANGE: (usize, usize) = (5, 10);
    pub const MIN_WINDOWS: usize = 3;

    pub fn new(length: usize, step: usize) -> Result<Self> {
        let s = Self { length, step };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = Self::LENGTH_RANGE;
        let (slo, shi) = Self::STEP_RANGE;
        if !(lo..=hi).contains(&self.length) || !(slo..=shi).contains(&self.step) {
            return Err(Error::InvalidParameter(format!(
                "window length {} / step {} outside [{lo}, {hi}] / [{slo}, {shi}]",
                self.length, self.step
            )));
        }
        Ok(())
    }

    pub fn count(&self, n: usize) -> usize {
        if n < self.length {
            0
        } else {
            (n - self.length) / self.step + 1
        }
    }

    pub fn windows(&self, n: usize) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.count(n)).map(move |w| w * self.step..w * self.step + self.length)
    }
}

/// How window-level tests combine into an edge decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Edge present when the fraction of rejecting windows exceeds `q`.
    #[default]
    Vote,
    /// One KS test on the residuals of the whole forecast segment.
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    pub forecaster: ForecastConfig,
    pub scheme: WindowScheme,
    pub alpha: f64,
    /// Majority threshold `q` on the rejection fraction.
    pub majority: f64,
    pub kind: InterventionKind,
    pub train_fraction: f64,
    /// Mixture components for knockoff fitting; 1 is the single Gaussian.
    pub knockoff_components: usize,
    /// Independent intervention draws per edge; windows are pooled across draws.
    pub redraws: usize,
    pub aggregation: Aggregation,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            forecaster: ForecastConfig::default(),
            scheme: WindowScheme::default(),
            alpha: 0.05,
            majority: 0.5,
            kind: InterventionKind::Knockoff,
            train_fraction: 0.8,
            knockoff_components: 1,
            redraws: 1,
            aggregation: Aggregation::Vote,
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) || !(0.0..1.0).contains(&self.majority) {
            return Err(Error::InvalidParameter("alpha must lie in (0, 1) and q in [0, 1)".into()));
        }
        if self.redraws == 0 || self.knockoff_components == 0 {
            return Err(Error::InvalidParameter("redraws and knockoff components must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTestReport {
    pub source: usize,
    pub target: usize,
    pub kind: String,
    pub windows: Vec<KsResult>,
    pub rejection_fraction: f64,
    pub decision: bool,
    pub alpha: f64,
    pub majority: f64,
}

impl EdgeTestReport {
    pub fn p_values(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.p_value).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub variables: Vec<String>,
    pub method: String,
    pub adjacency: Vec<Vec<u8>>,
    pub edges: Vec<EdgeTestReport>,
    pub train_rmse: Vec<f64>,
    pub config: DiscoveryConfig,
    pub seed: u64,
}

impl DiscoveryReport {
    pub fn graph(&self) -> CausalGraph {
        CausalGraph::from_matrix(&self.adjacency).expect("adjacency built from a graph")
    }
}

/// Runs the windowed invariance test for edge `i → j`: baseline residuals
/// and residuals with variable `i` replaced are computed once over the
/// forecast rows and compared on paired windows.
#[allow(clippy::too_many_arguments)]
pub fn test_edge(
    model: &ForecastModel,
    series: &MultivariateTimeSeries,
    forecast_rows: Range<usize>,
    source: usize,
    target: usize,
    kind: &InterventionKind,
    knockoffs: Option<&KnockoffModel>,
    config: &DiscoveryConfig,
    seed: &RngSeed,
) -> Result<EdgeTestReport> {
    if source == target {
        return Err(Error::SelfSubstitution(target));
    }
    let baseline = model.residuals_for_target(series, forecast_rows.clone(), target, None)?;
    edge_from_baseline(model, series, forecast_rows, source, target, kind, knockoffs, config, seed, &baseline.residuals)
}

#[allow(clippy::too_many_arguments)]
fn edge_from_baseline(
    model: &ForecastModel,
    series: &MultivariateTimeSeries,
    forecast_rows: Range<usize>,
    source: usize,
    target: usize,
    kind: &InterventionKind,
    knockoffs: Option<&KnockoffModel>,
    config: &DiscoveryConfig,
    seed: &RngSeed,
    baseline: &[f64],
) -> Result<EdgeTestReport> {
    let scheme = config.scheme;
    let count = scheme.count(baseline.len());
    if config.aggregation == Aggregation::Vote && count < WindowScheme::MIN_WINDOWS {
        return Err(Error::TooFewWindows {
            got: count,
            min: WindowScheme::MIN_WINDOWS,
        });
    }
    let mut windows = Vec::new();
    for draw in 0..config.redraws {
        let draw_seed = if config.redraws == 1 {
            seed.clone()
        } else {
            seed.child(format!("draw-{draw}"))
        };
        let replacement = interventions::generate(kind, source, series, knockoffs, &draw_seed, forecast_rows.clone())?;
        let intervened = model.residuals_for_target(series, forecast_rows.clone(), target, Some((source, &replacement)))?;
        match config.aggregation {
            Aggregation::Vote => {
                for w in scheme.windows(baseline.len()) {
                    windows.push(ks_two_sample(&baseline[w.clone()], &intervened.residuals[w])?);
                }
            }
            Aggregation::Pooled => windows.push(ks_two_sample(baseline, &intervened.residuals)?),
        }
    }
    let rejected = windows.iter().filter(|w| w.p_value < config.alpha).count();
    let rejection_fraction = rejected as f64 / windows.len() as f64;
    Ok(EdgeTestReport {
        source,
        target,
        kind: kind.tag().to_string(),
        windows,
        rejection_fraction,
        decision: rejection_fraction > config.majority,
        alpha: config.alpha,
        majority: config.majority,
    })
}

/// Fitted state shared by every edge test on one series: the split, the
/// trained forecaster and (when needed) the knockoff model.
pub struct PreparedDiscovery<'a> {
    pub series: &'a MultivariateTimeSeries,
    pub split: TrainForecastSplit,
    pub model: ForecastModel,
    pub knockoffs: Option<KnockoffModel>,
    pub config: DiscoveryConfig,
    pub seed: u64,
}

impl<'a> PreparedDiscovery<'a> {
    /// Fits the forecaster on the training segment and, if `with_knockoffs`,
    /// the knockoff model on the whole series. The forecaster seed is
    /// derived from `master_seed` and overrides the one in `config`.
    pub fn new(
        series: &'a MultivariateTimeSeries,
        config: &DiscoveryConfig,
        master_seed: u64,
        with_knockoffs: bool,
    ) -> Result<Self> {
        config.validate()?;
        if series.n_vars() < 2 {
            return Err(Error::InvalidSeries(format!(
                "discovery needs at least 2 variables, got {}",
                series.n_vars()
            )));
        }
        let p = config.forecaster.lag_depth;
        let split = split_train_forecast(series, config.train_fraction, p, config.scheme.length)?;
        let knockoffs = if with_knockoffs {
            Some(if config.knockoff_components > 1 {
                fit_gmm(series, config.knockoff_components, &RngSeed::new(master_seed, "knockoff-fit"))?
            } else {
                fit_gaussian(series)?
            })
        } else {
            None
        };
        let mut fc = config.forecaster.clone();
        fc.seed = RngSeed::new(master_seed, "forecaster-init");
        let model = forecaster::fit(&split.train, &fc)?;
        Ok(Self {
            series,
            split,
            model,
            knockoffs,
            config: config.clone(),
            seed: master_seed,
        })
    }

    /// Tests every ordered off-diagonal pair with `kind`. Edges run in
    /// parallel; each draws from its own `edge-i-j` stream.
    pub fn run(&self, kind: &InterventionKind) -> Result<DiscoveryReport> {
        if kind.needs_knockoffs() && self.knockoffs.is_none() {
            return Err(Error::MissingKnockoffModel);
        }
        let n = self.series.n_vars();
        let rows = self.split.forecast_rows();
        let baselines: Vec<Vec<f64>> = (0..n)
            .map(|j| Ok(self.model.residuals_for_target(self.series, rows.clone(), j, None)?.residuals))
            .collect::<Result<_>>()?;
        let kind_seed = RngSeed::new(self.seed, kind.tag());
        let edges: Vec<EdgeTestReport> = off_diagonal_pairs(n)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(i, j)| {
                edge_from_baseline(
                    &self.model,
                    self.series,
                    rows.clone(),
                    i,
                    j,
                    kind,
                    self.knockoffs.as_ref(),
                    &self.config,
                    &kind_seed.child(format!("edge-{i}-{j}")),
                    &baselines[j],
                )
            })
            .collect::<Result<_>>()?;
        let mut graph = CausalGraph::empty(n);
        for e in &edges {
            graph.set(e.source, e.target, e.decision);
        }
        let mut config = self.config.clone();
        config.kind = *kind;
        config.forecaster.seed = self.model.config.seed.clone();
        Ok(DiscoveryReport {
            variables: self.series.names().to_vec(),
            method: kind.tag().to_string(),
            adjacency: graph.to_matrix(),
            edges,
            train_rmse: self.model.train_rmse.clone(),
            config,
            seed: self.seed,
        })
    }
}

/// Fits once and tests every ordered pair with `config.kind`.
pub fn discover_graph(
    series: &MultivariateTimeSeries,
    config: &DiscoveryConfig,
    master_seed: u64,
) -> Result<(CausalGraph, DiscoveryReport)> {
    let prepared = PreparedDiscovery::new(series, config, master_seed, config.kind.needs_knockoffs())?;
    let report = prepared.run(&config.kind)?;
    Ok((report.graph(), report))
}
