//! Nonlinear autoregressive point forecaster.
//!
//! One network per target: `p·N` lagged standardized values of every
//! variable → tanh hidden layer → scalar one-step prediction. Residuals are
//! teacher-forced one-step errors, optionally with one predictor's history
//! substituted by a replacement series.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::series::{MultivariateTimeSeries, StandardizationParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    pub lag_depth: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// L2 penalty on the weights (not biases), added to the mean squared error.
    pub weight_decay: f64,
    pub seed: RngSeed,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            lag_depth: 10,
            hidden: 32,
            epochs: 300,
            learning_rate: 1e-3,
            batch_size: 64,
            weight_decay: 0.0,
            seed: RngSeed::new(0, "forecaster-init"),
        }
    }
}

impl ForecastConfig {
    fn validate(&self) -> Result<()> {
        if self.lag_depth == 0 || self.hidden == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidParameter(
                "lag depth, hidden width, batch size and epochs must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) || !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidParameter("bad step size or weight decay".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// Single-hidden-layer tanh network with a linear scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    inputs: usize,
    hidden: usize,
    /// `hidden × inputs`, row-major.
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let l1 = (6.0 / (inputs + hidden) as f64).sqrt();
        let l2 = (6.0 / (hidden + 1) as f64).sqrt();
        Self {
            inputs,
            hidden,
            w1: (0..inputs * hidden).map(|_| rng.random_range(-l1..l1)).collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| rng.random_range(-l2..l2)).collect(),
            b2: 0.0,
        }
    }

    /// Glorot-uniform weights drawn per input from `seed.child(key)`, so a
    /// weight depends on which variable and lag feeds it rather than on its
    /// column position.
    pub fn init_keyed(keys: &[String], hidden: usize, seed: &RngSeed) -> Self {
        let inputs = keys.len();
        let l1 = (6.0 / (inputs + hidden) as f64).sqrt();
        let l2 = (6.0 / (hidden + 1) as f64).sqrt();
        let mut w1 = vec![0.0; inputs * hidden];
        for (k, key) in keys.iter().enumerate() {
            let mut rng = seed.child(key).rng();
            for u in 0..hidden {
                w1[u * inputs + k] = rng.random_range(-l1..l1);
            }
        }
        let mut rng = seed.child("output").rng();
        Self {
            inputs,
            hidden,
            w1,
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| rng.random_range(-l2..l2)).collect(),
            b2: 0.0,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn n_params(&self) -> usize {
        self.hidden * (self.inputs + 2) + 1
    }

    /// Flat parameter vector `[w1, b1, w2, b2]`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params());
        let (h, k) = (self.hidden, self.inputs);
        self.w1.copy_from_slice(&p[..h * k]);
        self.b1.copy_from_slice(&p[h * k..h * k + h]);
        self.w2.copy_from_slice(&p[h * k + h..h * k + 2 * h]);
        self.b2 = p[h * k + 2 * h];
    }

    fn hidden_activations(&self, x: &[f64], out: &mut [f64]) {
        for (u, o) in out.iter_mut().enumerate() {
            let row = &self.w1[u * self.inputs..(u + 1) * self.inputs];
            let a: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[u];
            *o = a.tanh();
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut h = vec![0.0; self.hidden];
        self.hidden_activations(x, &mut h);
        h.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>() + self.b2
    }

    /// Mean squared error over the rows of `xs` (`inputs` values per row)
    /// plus `weight_decay·‖W‖²`, and its gradient in [`Mlp::params`] order.
    pub fn loss_and_gradient(&self, xs: &[f64], ys: &[f64], weight_decay: f64) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.n_params()];
        let loss = self.accumulate_gradient(xs, ys, weight_decay, &mut grad);
        (loss, grad)
    }

    fn accumulate_gradient(&self, xs: &[f64], ys: &[f64], weight_decay: f64, grad: &mut [f64]) -> f64 {
        let (h, k) = (self.hidden, self.inputs);
        let batch = ys.len() as f64;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (gw1, rest) = grad.split_at_mut(h * k);
        let (gb1, rest) = rest.split_at_mut(h);
        let (gw2, gb2) = rest.split_at_mut(h);
        let mut act = vec![0.0; h];
        let mut loss = 0.0;
        for (x, &y) in xs.chunks_exact(k).zip(ys) {
            self.hidden_activations(x, &mut act);
            let pred: f64 = act.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>() + self.b2;
            let err = pred - y;
            loss += err * err;
            let dy = 2.0 * err / batch;
            gb2[0] += dy;
            for u in 0..h {
                gw2[u] += dy * act[u];
                let da = dy * self.w2[u] * (1.0 - act[u] * act[u]);
                gb1[u] += da;
                let row = &mut gw1[u * k..(u + 1) * k];
                for (g, v) in row.iter_mut().zip(x) {
                    *g += da * v;
                }
            }
        }
        loss /= batch;
        if weight_decay > 0.0 {
            let mut penalty = 0.0;
            for (g, w) in gw1.iter_mut().zip(&self.w1) {
                *g += 2.0 * weight_decay * w;
                penalty += w * w;
            }
            for (g, w) in gw2.iter_mut().zip(&self.w2) {
                *g += 2.0 * weight_decay * w;
                penalty += w * w;
            }
            loss += weight_decay * penalty;
        }
        loss
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

// ---------------------------------------------------------------------------
// Forecast model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum TargetPredictor {
    /// Constant target column; predicts its (standardized) value.
    Constant(f64),
    Network(Mlp),
}

#[derive(Debug, Clone)]
pub struct ForecastModel {
    pub config: ForecastConfig,
    pub n_vars: usize,
    pub standardization: StandardizationParams,
    pub predictors: Vec<TargetPredictor>,
    /// Per target, mean training loss per epoch.
    pub loss_trace: Vec<Vec<f64>>,
    /// Per target, final training RMSE in standardized units.
    pub train_rmse: Vec<f64>,
}

/// What a residual series was computed under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Substitution {
    None,
    Variable { variable: usize, kind: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    pub target: usize,
    /// `z[j,t] − ẑ[j,t]` in the target's original units.
    pub residuals: Vec<f64>,
    pub substitution: Substitution,
}

/// Standardized value with constant columns mapped to 0.
#[inline]
fn scaled(params: &StandardizationParams, i: usize, v: f64) -> f64 {
    if params.constant[i] {
        0.0
    } else {
        params.forward(i, v)
    }
}

/// Lagged input window for predicting row `t`: for lag `l = 1..=p` and
/// variable `i`, entry `(l − 1)·N + i` holds the standardized `z[i, t − l]`.
/// `value(t, i)` supplies raw values.
fn fill_window(
    params: &StandardizationParams,
    p: usize,
    n: usize,
    t: usize,
    value: impl Fn(usize, usize) -> f64,
    out: &mut [f64],
) {
    for l in 1..=p {
        for i in 0..n {
            out[(l - 1) * n + i] = scaled(params, i, value(t - l, i));
        }
    }
}

/// Trains one predictor per target on `train`.
pub fn fit(train: &MultivariateTimeSeries, config: &ForecastConfig) -> Result<ForecastModel> {
    config.validate()?;
    let (r, n, p) = (train.len(), train.n_vars(), config.lag_depth);
    if r <= p + config.batch_size {
        return Err(Error::InsufficientData(format!(
            "training needs more than p + batch = {} rows, got {r}",
            p + config.batch_size
        )));
    }
    let standardization = StandardizationParams::fit(train);
    let k = p * n;
    let samples = r - p;
    let mut xs = vec![0.0; samples * k];
    for (s, t) in (p..r).enumerate() {
        fill_window(&standardization, p, n, t, |tt, i| train.get(tt, i), &mut xs[s * k..(s + 1) * k]);
    }

    let trained: Vec<(TargetPredictor, Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|j| {
            if standardization.constant[j] {
                let c = train.get(0, j);
                return Ok((TargetPredictor::Constant(c), Vec::new(), 0.0));
            }
            let ys: Vec<f64> = (p..r).map(|t| standardization.forward(j, train.get(t, j))).collect();
            train_target(j, train.names(), &xs, &ys, config)
        })
        .collect::<Result<_>>()?;

    let mut predictors = Vec::with_capacity(n);
    let mut loss_trace = Vec::with_capacity(n);
    let mut train_rmse = Vec::with_capacity(n);
    for (pred, trace, rmse) in trained {
        predictors.push(pred);
        loss_trace.push(trace);
        train_rmse.push(rmse);
    }
    Ok(ForecastModel {
        config: config.clone(),
        n_vars: n,
        standardization,
        predictors,
        loss_trace,
        train_rmse,
    })
}

fn train_target(
    target: usize,
    names: &[String],
    xs: &[f64],
    ys: &[f64],
    config: &ForecastConfig,
) -> Result<(TargetPredictor, Vec<f64>, f64)> {
    let n = names.len();
    let k = config.lag_depth * n;
    let keys: Vec<String> = (0..k).map(|c| format!("in-{}-lag{}", names[c % n], c / n + 1)).collect();
    let seed = config.seed.child(format!("target-{}", names[target]));
    let mut net = Mlp::init_keyed(&keys, config.hidden, &seed);
    let mut rng = seed.child("batches").rng();
    let mut params = net.params();
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut grad = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..ys.len()).collect();
    let mut bx = Vec::with_capacity(config.batch_size * k);
    let mut by = Vec::with_capacity(config.batch_size);
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            bx.clear();
            by.clear();
            for &s in batch {
                bx.extend_from_slice(&xs[s * k..(s + 1) * k]);
                by.push(ys[s]);
            }
            let loss = net.accumulate_gradient(&bx, &by, config.weight_decay, &mut grad);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { target, epoch });
            }
            epoch_loss += loss * batch.len() as f64;
            adam.step(&mut params, &grad);
            net.set_params(&params);
        }
        trace.push(epoch_loss / ys.len() as f64);
    }
    let mse = xs
        .chunks_exact(k)
        .zip(ys)
        .map(|(x, y)| (net.predict(x) - y).powi(2))
        .sum::<f64>()
        / ys.len() as f64;
    if !mse.is_finite() {
        return Err(Error::NonFiniteLoss {
            target,
            epoch: config.epochs,
        });
    }
    Ok((TargetPredictor::Network(net), trace, mse.sqrt()))
}

impl ForecastModel {
    pub fn lag_depth(&self) -> usize {
        self.config.lag_depth
    }

    /// One-step prediction for target `j` in original units from a window
    /// built by [`fill_window`].
    fn predict_window(&self, j: usize, window: &[f64]) -> f64 {
        match &self.predictors[j] {
            TargetPredictor::Constant(c) => *c,
            TargetPredictor::Network(net) => self.standardization.inverse(j, net.predict(window)),
        }
    }

    /// Teacher-forced one-step residuals of `target` over `rows`. The first
    /// `p` rows of the segment serve as warm-up, so the output holds
    /// `rows.len() − p` residuals. With `substitution = Some((i, z̃))`,
    /// variable `i`'s lagged inputs are read from `z̃`, which must be aligned
    /// with `rows`.
    pub fn residuals_for_target(
        &self,
        series: &MultivariateTimeSeries,
        rows: Range<usize>,
        target: usize,
        substitution: Option<(usize, &[f64])>,
    ) -> Result<ResidualSeries> {
        let (n, p) = (self.n_vars, self.lag_depth());
        if series.n_vars() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: series.n_vars(),
            });
        }
        if target >= n {
            return Err(Error::InvalidParameter(format!("target {target} outside {n} variables")));
        }
        if rows.end > series.len() || rows.len() <= p {
            return Err(Error::SegmentTooShort {
                segment: "forecast",
                len: rows.len().min(series.len().saturating_sub(rows.start)),
                min: p + 1,
            });
        }
        if let Some((i, rep)) = substitution {
            if i == target {
                return Err(Error::SelfSubstitution(target));
            }
            if i >= n {
                return Err(Error::InvalidParameter(format!("substituted variable {i} outside {n}")));
            }
            if rep.len() != rows.len() {
                return Err(Error::DimensionMismatch {
                    expected: rows.len(),
                    got: rep.len(),
                });
            }
        }
        let start = rows.start;
        let value = |t: usize, i: usize| match substitution {
            Some((v, rep)) if v == i => rep[t - start],
            _ => series.get(t, i),
        };
        let mut window = vec![0.0; p * n];
        let residuals = (start + p..rows.end)
            .map(|t| {
                fill_window(&self.standardization, p, n, t, value, &mut window);
                series.get(t, target) - self.predict_window(target, &window)
            })
            .collect();
        Ok(ResidualSeries {
            target,
            residuals,
            substitution: match substitution {
                None => Substitution::None,
                Some((variable, _)) => Substitution::Variable {
                    variable,
                    kind: String::new(),
                },
            },
        })
    }

    /// Residuals for every target; when substituting variable `i`, target
    /// `i` itself is skipped.
    pub fn residuals(
        &self,
        series: &MultivariateTimeSeries,
        rows: Range<usize>,
        substitution: Option<(usize, &[f64])>,
    ) -> Result<Vec<ResidualSeries>> {
        (0..self.n_vars)
            .filter(|&j| substitution.is_none_or(|(i, _)| i != j))
            .map(|j| self.residuals_for_target(series, rows.clone(), j, substitution))
            .collect()
    }

    /// Writes a `name v1 v2 ...` text file holding every parameter.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let c = &self.config;
        let line = |out: &mut String, name: &str, vals: &[f64]| {
            let _ = write!(out, "{name}");
            for v in vals {
                let _ = write!(out, " {v:?}");
            }
            out.push('\n');
        };
        line(&mut out, "n_vars", &[self.n_vars as f64]);
        line(&mut out, "lag_depth", &[c.lag_depth as f64]);
        line(&mut out, "hidden", &[c.hidden as f64]);
        line(&mut out, "epochs", &[c.epochs as f64]);
        line(&mut out, "learning_rate", &[c.learning_rate]);
        line(&mut out, "batch_size", &[c.batch_size as f64]);
        line(&mut out, "weight_decay", &[c.weight_decay]);
        line(&mut out, "seed", &[c.seed.master as f64]);
        line(&mut out, "std.mean", &self.standardization.mean);
        line(&mut out, "std.sd", &self.standardization.sd);
        let flags: Vec<f64> = self.standardization.constant.iter().map(|&b| f64::from(u8::from(b))).collect();
        line(&mut out, "std.constant", &flags);
        line(&mut out, "train_rmse", &self.train_rmse);
        for (j, pred) in self.predictors.iter().enumerate() {
            match pred {
                TargetPredictor::Constant(v) => line(&mut out, &format!("target.{j}.constant"), &[*v]),
                TargetPredictor::Network(net) => line(&mut out, &format!("target.{j}.params"), &net.params()),
            }
        }
        let _ = writeln!(out, "# seed label: {}", c.seed.label);
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = std::collections::HashMap::new();
        let mut label = String::from("forecaster-init");
        for line in text.lines() {
            if let Some(l) = line.strip_prefix("# seed label: ") {
                label = l.to_string();
                continue;
            }
            let mut parts = line.split_whitespace();
            let Some(name) = parts.next() else { continue };
            let vals = parts
                .map(|s| s.parse::<f64>().map_err(|_| Error::ModelFile(format!("bad number {s:?} in {name}"))))
                .collect::<Result<Vec<f64>>>()?;
            entries.insert(name.to_string(), vals);
        }
        let get = |k: &str| entries.get(k).ok_or_else(|| Error::ModelFile(format!("missing key {k}")));
        let scalar = |k: &str| -> Result<f64> {
            get(k)?.first().copied().ok_or_else(|| Error::ModelFile(format!("empty key {k}")))
        };
        let n_vars = scalar("n_vars")? as usize;
        let config = ForecastConfig {
            lag_depth: scalar("lag_depth")? as usize,
            hidden: scalar("hidden")? as usize,
            epochs: scalar("epochs")? as usize,
            learning_rate: scalar("learning_rate")?,
            batch_size: scalar("batch_size")? as usize,
            weight_decay: scalar("weight_decay")?,
            seed: RngSeed::new(scalar("seed")? as u64, label),
        };
        let standardization = StandardizationParams {
            mean: get("std.mean")?.clone(),
            sd: get("std.sd")?.clone(),
            constant: get("std.constant")?.iter().map(|&v| v != 0.0).collect(),
        };
        let inputs = config.lag_depth * n_vars;
        let predictors = (0..n_vars)
            .map(|j| {
                if let Some(v) = entries.get(&format!("target.{j}.constant")) {
                    return Ok(TargetPredictor::Constant(v[0]));
                }
                let params = get(&format!("target.{j}.params"))?;
                let mut net = Mlp {
                    inputs,
                    hidden: config.hidden,
                    w1: vec![0.0; inputs * config.hidden],
                    b1: vec![0.0; config.hidden],
                    w2: vec![0.0; config.hidden],
                    b2: 0.0,
                };
                if params.len() != net.n_params() {
                    return Err(Error::ModelFile(format!("target {j}: wrong parameter count")));
                }
                net.set_params(params);
                Ok(TargetPredictor::Network(net))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            config,
            n_vars,
            standardization,
            predictors,
            loss_trace: vec![Vec::new(); n_vars],
            train_rmse: get("train_rmse")?.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn quick_config(seed: u64) -> ForecastConfig {
        ForecastConfig {
            lag_depth: 3,
            hidden: 8,
            epochs: 40,
            learning_rate: 1e-2,
            batch_size: 32,
            weight_decay: 0.0,
            seed: RngSeed::new(seed, "forecaster-init"),
        }
    }

    fn noise_pair(r: usize, seed: u64) -> MultivariateTimeSeries {
        let mut rng = RngSeed::new(seed, "noise").rng();
        let mut a = vec![0.0; r];
        let b: Vec<f64> = (0..r).map(|_| rng.sample(StandardNormal)).collect();
        for t in 1..r {
            a[t] = 0.7 * a[t - 1] + rng.sample::<f64, _>(StandardNormal);
        }
        MultivariateTimeSeries::from_columns(&[a, b]).unwrap()
    }

    #[test]
    fn finite_difference_gradient() {
        let mut rng = RngSeed::new(1, "gc").rng();
        let net = Mlp::init(6, 5, &mut rng);
        let xs: Vec<f64> = (0..4 * 6).map(|_| rng.sample(StandardNormal)).collect();
        let ys: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
        let (_, grad) = net.loss_and_gradient(&xs, &ys, 0.01);
        let base = net.params();
        for (k, g) in grad.iter().enumerate() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut p = base.clone();
            p[k] += 1e-5;
            plus.set_params(&p);
            p[k] -= 2e-5;
            minus.set_params(&p);
            let fd = (plus.loss_and_gradient(&xs, &ys, 0.01).0 - minus.loss_and_gradient(&xs, &ys, 0.01).0) / 2e-5;
            assert!((fd - g).abs() <= 1e-4 * fd.abs().max(g.abs()).max(1e-3), "param {k}: {fd} vs {g}");
        }
    }

    #[test]
    fn identity_substitution_changes_nothing() {
        let s = noise_pair(400, 2);
        let m = fit(&s.slice_rows(0..300).unwrap(), &quick_config(2)).unwrap();
        let col = s.column(1);
        let base = m.residuals_for_target(&s, 300..400, 0, None).unwrap();
        let same = m.residuals_for_target(&s, 300..400, 0, Some((1, &col[300..400]))).unwrap();
        assert_eq!(base.residuals, same.residuals);
        assert_eq!(base.residuals.len(), 100 - 3);
    }

    #[test]
    fn rejects_self_substitution_and_bad_lengths() {
        let s = noise_pair(400, 3);
        let m = fit(&s.slice_rows(0..300).unwrap(), &quick_config(3)).unwrap();
        let col = s.column(0);
        assert!(matches!(
            m.residuals_for_target(&s, 300..400, 0, Some((0, &col[300..400]))),
            Err(Error::SelfSubstitution(0))
        ));
        assert!(matches!(
            m.residuals_for_target(&s, 300..400, 1, Some((0, &col[300..350]))),
            Err(Error::DimensionMismatch { .. })
        ));
        let all = m.residuals(&s, 300..400, Some((0, &col[300..400]))).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].target, 1);
    }

    #[test]
    fn insufficient_training_data() {
        let s = noise_pair(30, 4);
        assert!(matches!(fit(&s, &quick_config(4)), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn absurd_step_size_reports_non_finite_loss() {
        let s = noise_pair(300, 5);
        let mut cfg = quick_config(5);
        cfg.learning_rate = 1e300;
        cfg.epochs = 5;
        // Either the loss blows up or training happens to stay finite; it must never return NaN params.
        match fit(&s, &cfg) {
            Err(Error::NonFiniteLoss { .. }) => {}
            Ok(m) => assert!(m.train_rmse.iter().all(|v| v.is_finite())),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn constant_target_is_short_circuited() {
        let s = MultivariateTimeSeries::from_columns(&[vec![4.0; 300], noise_pair(300, 6).column(1)]).unwrap();
        let m = fit(&s, &quick_config(6)).unwrap();
        assert!(matches!(m.predictors[0], TargetPredictor::Constant(_)));
        let r = m.residuals_for_target(&s, 200..300, 0, None).unwrap();
        assert!(r.residuals.iter().all(|e| e.abs() < 1e-3));
    }

    #[test]
    fn training_is_deterministic() {
        let s = noise_pair(300, 7);
        let a = fit(&s, &quick_config(7)).unwrap();
        let b = fit(&s, &quick_config(7)).unwrap();
        assert_eq!(a.predictors, b.predictors);
        assert_eq!(a.train_rmse, b.train_rmse);
    }

    #[test]
    fn save_load_round_trip() {
        let s = noise_pair(300, 8);
        let m = fit(&s, &quick_config(8)).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        m.save(f.path()).unwrap();
        let back = ForecastModel::load(f.path()).unwrap();
        assert_eq!(back.predictors, m.predictors);
        assert_eq!(back.config, m.config);
        assert_eq!(back.standardization, m.standardization);
        let r1 = m.residuals_for_target(&s, 200..300, 0, None).unwrap();
        let r2 = back.residuals_for_target(&s, 200..300, 0, None).unwrap();
        assert_eq!(r1, r2);
    }
}
