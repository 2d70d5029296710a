//! Causal discovery in multivariate time series by model invariance.
//!
//! A nonlinear autoregressive forecaster is trained on the observed series.
//! Each candidate predictor is then replaced by an interventional copy
//! (knockoff, mean, uniform or out-of-distribution) and a two-sample KS test
//! over forecast windows checks whether the target's residual distribution
//! changes. A change means the predictor is causal for the target.
//!
//! Modules:
//! - [`series`], [`graph`], [`rng`]: shared data types and plumbing
//! - [`synth`]: randomized structural causal models with ground truth
//! - [`knockoff`]: Gaussian and mixture knockoff samplers
//! - [`forecaster`]: per-target tanh network with one-step residuals
//! - [`interventions`]: the four replacement schemes
//! - [`inference`]: KS test, edge tests and graph assembly
//! - [`baseline`]: VAR Granger causality
//! - [`eval`]: metrics and the benchmark runner

pub mod baseline;
pub mod error;
pub mod eval;
pub mod forecaster;
pub mod graph;
pub mod inference;
pub mod interventions;
pub mod knockoff;
pub mod rng;
pub mod series;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use graph::CausalGraph;
pub use rng::RngSeed;
pub use series::MultivariateTimeSeries;
