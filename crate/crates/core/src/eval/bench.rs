use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{score, GraphMetrics};
use crate::baseline::granger_graph;
use crate::error::{Error, Result};
use crate::inference::{DiscoveryConfig, PreparedDiscovery};
use crate::interventions::InterventionKind;
use crate::rng::RngSeed;
use crate::synth::{sample_spec, simulate, ParameterRanges, ScmDataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Intervention(InterventionKind),
    VarGc,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "var-gc" | "vargc" | "var" => Ok(Method::VarGc),
            other => other.parse().map(Method::Intervention),
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Intervention(k) => f.write_str(k.tag()),
            Method::VarGc => f.write_str("var-gc"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub nodes: usize,
    pub edges: usize,
    pub ranges: ParameterRanges,
    pub discovery: DiscoveryConfig,
    pub var_order: usize,
    pub var_alpha: f64,
    /// Specs whose linear dynamics have a spectral radius at or above this
    /// are redrawn.
    pub max_spectral_radius: f64,
    pub max_spec_attempts: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: vec![
                Method::Intervention(InterventionKind::Knockoff),
                Method::Intervention(InterventionKind::mean()),
                Method::Intervention(InterventionKind::Uniform),
                Method::Intervention(InterventionKind::ood()),
                Method::VarGc,
            ],
            seeds: (0..10).collect(),
            nodes: 5,
            edges: 5,
            ranges: ParameterRanges::default(),
            discovery: DiscoveryConfig::default(),
            var_order: 10,
            var_alpha: 0.05,
            max_spectral_radius: 0.95,
            max_spec_attempts: 100,
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("bench config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub seed: u64,
    pub method: Method,
    pub metrics: Option<GraphMetrics>,
    pub error: Option<String>,
    pub adjacency: Option<Vec<Vec<u8>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub runs: usize,
    pub failures: usize,
    pub mean_fpr: f64,
    pub sd_fpr: f64,
    pub mean_f_score: f64,
    pub sd_f_score: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub seed: u64,
    pub attempts: usize,
    pub spectral_radius: f64,
    pub truth: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub seed: u64,
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchConfig,
    pub datasets: Vec<DatasetInfo>,
    pub rows: Vec<BenchRow>,
    pub summary: Vec<MethodSummary>,
    /// Wall-clock per (seed, stage). The only non-deterministic field.
    pub timing: Vec<Timing>,
}

impl BenchmarkReport {
    /// JSON with the timing field emptied; byte-identical across reruns.
    pub fn body_json(&self) -> Result<String> {
        let mut body = self.clone();
        body.timing.clear();
        Ok(serde_json::to_string_pretty(&body)?)
    }

    pub fn summary_for(&self, method: &Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| &s.method == method)
    }

    /// Recomputes per-method aggregates from the rows.
    pub fn recompute_summary(&self) -> Vec<MethodSummary> {
        summarize(&self.config.methods, &self.rows)
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (m, var.sqrt())
}

fn summarize(methods: &[Method], rows: &[BenchRow]) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|method| {
            let cells: Vec<&BenchRow> = rows.iter().filter(|r| &r.method == method).collect();
            let ok: Vec<&GraphMetrics> = cells.iter().filter_map(|r| r.metrics.as_ref()).collect();
            let pick = |f: fn(&GraphMetrics) -> f64| ok.iter().map(|m| f(m)).collect::<Vec<f64>>();
            let (mean_fpr, sd_fpr) = mean_sd(&pick(|m| m.fpr));
            let (mean_f_score, sd_f_score) = mean_sd(&pick(|m| m.f_score));
            MethodSummary {
                method: *method,
                runs: ok.len(),
                failures: cells.len() - ok.len(),
                mean_fpr,
                sd_fpr,
                mean_f_score,
                sd_f_score,
                mean_precision: mean_sd(&pick(|m| m.precision)).0,
                mean_recall: mean_sd(&pick(|m| m.recall)).0,
            }
        })
        .collect()
}

/// Draws specs for `seed` until one is linearly stable and simulates
/// without overflow.
pub fn benchmark_dataset(config: &BenchConfig, seed: u64) -> Result<(ScmDataset, DatasetInfo)> {
    for attempt in 0..config.max_spec_attempts.max(1) {
        let spec = sample_spec(
            config.nodes,
            config.edges,
            &RngSeed::new(seed, format!("synth/attempt-{attempt}")),
            &config.ranges,
        )?;
        let radius = spec.linear_spectral_radius();
        if radius >= config.max_spectral_radius {
            continue;
        }
        match simulate(&spec, &RngSeed::new(seed, format!("simulate/attempt-{attempt}"))) {
            Ok(ds) => {
                let info = DatasetInfo {
                    seed,
                    attempts: attempt + 1,
                    spectral_radius: radius,
                    truth: ds.truth.to_matrix(),
                };
                return Ok((ds, info));
            }
            Err(Error::NonFinite { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::InvalidParameter(format!(
        "no stable spec for seed {seed} after {} attempts",
        config.max_spec_attempts
    )))
}

fn run_seed(config: &BenchConfig, seed: u64) -> (Option<DatasetInfo>, Vec<BenchRow>, Vec<Timing>) {
    let mut timing = Vec::new();
    let fail_all = |msg: String| -> Vec<BenchRow> {
        config
            .methods
            .iter()
            .map(|m| BenchRow {
                seed,
                method: *m,
                metrics: None,
                error: Some(msg.clone()),
                adjacency: None,
            })
            .collect()
    };
    let (data, info) = match benchmark_dataset(config, seed) {
        Ok(v) => v,
        Err(e) => return (None, fail_all(e.to_string()), timing),
    };

    let kinds: Vec<InterventionKind> = config
        .methods
        .iter()
        .filter_map(|m| match m {
            Method::Intervention(k) => Some(*k),
            Method::VarGc => None,
        })
        .collect();
    let start = Instant::now();
    let prepared = if kinds.is_empty() {
        None
    } else {
        let with_knockoffs = kinds.iter().any(InterventionKind::needs_knockoffs);
        Some(PreparedDiscovery::new(&data.series, &config.discovery, seed, with_knockoffs).map_err(|e| e.to_string()))
    };
    if prepared.is_some() {
        timing.push(Timing {
            seed,
            stage: "forecaster-fit".into(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    let rows = config
        .methods
        .iter()
        .map(|method| {
            let start = Instant::now();
            let graph = match method {
                Method::Intervention(kind) => match prepared.as_ref().expect("prepared when kinds exist") {
                    Ok(p) => p.run(kind).map(|r| r.graph()).map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                },
                Method::VarGc => granger_graph(&data.series, config.var_order, config.var_alpha)
                    .map(|(g, _)| g)
                    .map_err(|e| e.to_string()),
            };
            timing.push(Timing {
                seed,
                stage: method.to_string(),
                seconds: start.elapsed().as_secs_f64(),
            });
            match graph.and_then(|g| score(&g, &data.truth).map(|m| (m, g)).map_err(|e| e.to_string())) {
                Ok((metrics, g)) => BenchRow {
                    seed,
                    method: *method,
                    metrics: Some(metrics),
                    error: None,
                    adjacency: Some(g.to_matrix()),
                },
                Err(e) => BenchRow {
                    seed,
                    method: *method,
                    metrics: None,
                    error: Some(e),
                    adjacency: None,
                },
            }
        })
        .collect();
    (Some(info), rows, timing)
}

/// Per seed: sample a spec, simulate, run every method on the same data and
/// score it. Failures are recorded per cell. Seeds run in parallel and are
/// reduced in seed order.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchmarkReport> {
    if config.seeds.is_empty() {
        return Err(Error::InvalidParameter("benchmark needs at least one seed".into()));
    }
    if config.methods.is_empty() {
        return Err(Error::InvalidParameter("benchmark needs at least one method".into()));
    }
    config.discovery.validate()?;
    let per_seed: Vec<_> = config.seeds.par_iter().map(|&s| run_seed(config, s)).collect();
    let mut datasets = Vec::new();
    let mut rows = Vec::new();
    let mut timing = Vec::new();
    for (info, r, t) in per_seed {
        datasets.extend(info);
        rows.extend(r);
        timing.extend(t);
    }
    let summary = summarize(&config.methods, &rows);
    Ok(BenchmarkReport {
        config: config.clone(),
        datasets,
        rows,
        summary,
        timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_strings() {
        for s in ["knockoff", "mean", "uniform", "ood", "var-gc"] {
            assert_eq!(s.parse::<Method>().unwrap().to_string(), s);
        }
        assert!("pcmci".parse::<Method>().is_err());
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = BenchConfig::default();
        let back = BenchConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        let partial = BenchConfig::from_toml("methods = [\"knockoff\", \"var-gc\"]\nseeds = [3]\n").unwrap();
        assert_eq!(partial.seeds, vec![3]);
        assert_eq!(partial.nodes, 5);
        assert!(BenchConfig::from_toml("methods = [\"nope\"]").is_err());
    }

    #[test]
    fn summary_statistics() {
        let m = |fpr: f64, f: f64| GraphMetrics {
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
            fpr,
            precision: 0.0,
            recall: 0.0,
            f_score: f,
        };
        let rows = vec![
            BenchRow { seed: 0, method: Method::VarGc, metrics: Some(m(0.1, 0.5)), error: None, adjacency: None },
            BenchRow { seed: 1, method: Method::VarGc, metrics: Some(m(0.3, 0.7)), error: None, adjacency: None },
            BenchRow { seed: 2, method: Method::VarGc, metrics: None, error: Some("x".into()), adjacency: None },
        ];
        let s = &summarize(&[Method::VarGc], &rows)[0];
        assert_eq!((s.runs, s.failures), (2, 1));
        assert!((s.mean_fpr - 0.2).abs() < 1e-12 && (s.mean_f_score - 0.6).abs() < 1e-12);
        assert!((s.sd_fpr - (0.02f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_sweeps_rejected() {
        let cfg = BenchConfig {
            seeds: vec![],
            ..Default::default()
        };
        assert!(run_benchmark(&cfg).is_err());
    }
}
