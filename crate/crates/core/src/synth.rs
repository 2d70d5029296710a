//! Randomized structural causal models over stationary time series.
//!
//! Each node follows
//!
//! ```text
//! Z[j,t] = a_j · Z[j,t-1] + Σ_(i→j) c · f(Z[i,t-τ]) + η[j,t],   η ~ N(0, σ²_j)
//! ```
//!
//! with `f(z) = z` (linear) or `f(z) = exp(-z²)` (exponential, bounded).
//! Nodes are updated in index order, so a lag-0 edge `i → j` reads the
//! current step when `i < j` and the previous step otherwise.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{off_diagonal_pairs, CausalGraph};
use crate::rng::RngSeed;
use crate::series::{default_names, MultivariateTimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dependence {
    Linear,
    Exponential,
}

impl Dependence {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Dependence::Linear => z,
            Dependence::Exponential => (-z * z).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmEdge {
    pub source: usize,
    pub target: usize,
    pub coupling: f64,
    pub lag: usize,
    pub function: Dependence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmSpec {
    pub n_nodes: usize,
    pub autocoefficients: Vec<f64>,
    pub edges: Vec<ScmEdge>,
    pub noise_variances: Vec<f64>,
    pub length: usize,
    pub burn_in: usize,
}

/// Closed sampling intervals for [`sample_spec`]. Defaults follow the
/// benchmark model's stated ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParameterRanges {
    pub autocoefficient: (f64, f64),
    pub coupling: (f64, f64),
    pub lag: (usize, usize),
    pub noise_variance: (f64, f64),
    /// Probability that an edge uses the exponential dependence.
    pub exponential_probability: f64,
    pub length: usize,
    pub burn_in: usize,
}

impl Default for ParameterRanges {
    fn default() -> Self {
        Self {
            autocoefficient: (0.2, 1.0),
            coupling: (0.2, 1.0),
            lag: (0, 10),
            noise_variance: (0.30, 0.9),
            exponential_probability: 0.5,
            length: 2000,
            burn_in: 500,
        }
    }
}

impl ParameterRanges {
    fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ok(self.autocoefficient) || !ok(self.coupling) || !ok(self.noise_variance) || self.lag.0 > self.lag.1 {
            return Err(Error::InvalidParameter("empty or non-finite parameter range".into()));
        }
        if self.noise_variance.0 < 0.0 {
            return Err(Error::InvalidParameter("negative noise variance".into()));
        }
        if !(0.0..=1.0).contains(&self.exponential_probability) {
            return Err(Error::InvalidParameter("exponential probability outside [0, 1]".into()));
        }
        Ok(())
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Draws a random spec: `edge_count` distinct ordered off-diagonal pairs,
/// every coefficient uniform on its range.
pub fn sample_spec(n_nodes: usize, edge_count: usize, seed: &RngSeed, ranges: &ParameterRanges) -> Result<ScmSpec> {
    if n_nodes < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 nodes, got {n_nodes}")));
    }
    ranges.validate()?;
    let max = n_nodes * (n_nodes - 1);
    if edge_count > max {
        return Err(Error::TooManyEdges { edges: edge_count, max });
    }
    let mut rng = seed.rng();
    let pairs: Vec<(usize, usize)> = off_diagonal_pairs(n_nodes).collect();
    let mut chosen = sample_indices(&mut rng, max, edge_count).into_vec();
    chosen.sort_unstable();

    let autocoefficients = (0..n_nodes).map(|_| uniform(&mut rng, ranges.autocoefficient)).collect();
    let noise_variances = (0..n_nodes).map(|_| uniform(&mut rng, ranges.noise_variance)).collect();
    let edges = chosen
        .into_iter()
        .map(|k| {
            let (source, target) = pairs[k];
            let coupling = uniform(&mut rng, ranges.coupling);
            let lag = rng.random_range(ranges.lag.0..=ranges.lag.1);
            let function = if rng.random_bool(ranges.exponential_probability) {
                Dependence::Exponential
            } else {
                Dependence::Linear
            };
            ScmEdge {
                source,
                target,
                coupling,
                lag,
                function,
            }
        })
        .collect();
    let spec = ScmSpec {
        n_nodes,
        autocoefficients,
        edges,
        noise_variances,
        length: ranges.length,
        burn_in: ranges.burn_in.max(ranges.lag.1),
    };
    spec.validate()?;
    Ok(spec)
}

impl ScmSpec {
    /// Structural checks: index bounds, no self-edges or duplicates, finite
    /// nonnegative parameters.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes;
        if n == 0 || self.autocoefficients.len() != n || self.noise_variances.len() != n {
            return Err(Error::InvalidParameter("per-node parameter vectors must have length n_nodes".into()));
        }
        if self.autocoefficients.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("non-finite autocoefficient".into()));
        }
        if self.noise_variances.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("noise variances must be finite and nonnegative".into()));
        }
        let mut seen = CausalGraph::empty(n);
        for e in &self.edges {
            if e.source >= n || e.target >= n {
                return Err(Error::InvalidParameter(format!("edge {}->{} outside {n} nodes", e.source, e.target)));
            }
            if e.source == e.target {
                return Err(Error::InvalidParameter(format!("self-edge on node {}", e.source)));
            }
            if seen.has_edge(e.source, e.target) {
                return Err(Error::InvalidParameter(format!("duplicate edge {}->{}", e.source, e.target)));
            }
            if !e.coupling.is_finite() {
                return Err(Error::InvalidParameter("non-finite coupling".into()));
            }
            seen.set(e.source, e.target, true);
        }
        Ok(())
    }

    /// True when every parameter lies inside `ranges`.
    pub fn within(&self, ranges: &ParameterRanges) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        self.autocoefficients.iter().all(|&a| inside(a, ranges.autocoefficient))
            && self.noise_variances.iter().all(|&v| inside(v, ranges.noise_variance))
            && self
                .edges
                .iter()
                .all(|e| inside(e.coupling, ranges.coupling) && e.lag >= ranges.lag.0 && e.lag <= ranges.lag.1)
    }

    pub fn truth(&self) -> CausalGraph {
        CausalGraph::from_edges(self.n_nodes, self.edges.iter().map(|e| (e.source, e.target)))
            .expect("validated spec")
    }

    pub fn max_lag(&self) -> usize {
        self.edges.iter().map(|e| e.lag).max().unwrap_or(0).max(1)
    }

    /// Spectral radius of the linear part of the recursion (exponential
    /// terms are bounded and ignored). Values below 1 mean the linear
    /// dynamics are stable.
    pub fn linear_spectral_radius(&self) -> f64 {
        let n = self.n_nodes;
        let lags = self.max_lag();
        // b[k] holds the coefficient matrix for lag k (b[0] contemporaneous).
        let mut b = vec![DMatrix::<f64>::zeros(n, n); lags + 1];
        for (j, &a) in self.autocoefficients.iter().enumerate() {
            b[1][(j, j)] += a;
        }
        for e in self.edges.iter().filter(|e| e.function == Dependence::Linear) {
            let lag = if e.lag == 0 && e.source > e.target { 1 } else { e.lag };
            b[lag][(e.target, e.source)] += e.coupling;
        }
        let contemporaneous = DMatrix::<f64>::identity(n, n) - &b[0];
        let inv = contemporaneous.try_inverse().expect("unit lower-triangular");
        let dim = n * lags;
        let mut companion = DMatrix::<f64>::zeros(dim, dim);
        for k in 1..=lags {
            let block = &inv * &b[k];
            companion.view_mut((0, (k - 1) * n), (n, n)).copy_from(&block);
        }
        for k in 1..lags {
            companion
                .view_mut((k * n, (k - 1) * n), (n, n))
                .copy_from(&DMatrix::<f64>::identity(n, n));
        }
        companion
            .complex_eigenvalues()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct ScmDataset {
    pub series: MultivariateTimeSeries,
    pub truth: CausalGraph,
    pub spec: ScmSpec,
}

/// Runs the recursion for `burn_in + length` steps from a zero history and
/// keeps the last `length` steps.
pub fn simulate(spec: &ScmSpec, seed: &RngSeed) -> Result<ScmDataset> {
    spec.validate()?;
    if spec.length < 100 {
        return Err(Error::InvalidParameter(format!("length {} < 100", spec.length)));
    }
    if spec.burn_in < spec.max_lag() {
        return Err(Error::InvalidParameter(format!(
            "burn-in {} shorter than max lag {}",
            spec.burn_in,
            spec.max_lag()
        )));
    }
    let n = spec.n_nodes;
    let total = spec.burn_in + spec.length;
    let mut rng = seed.rng();
    let noise: Vec<Normal<f64>> = spec
        .noise_variances
        .iter()
        .map(|v| Normal::new(0.0, v.sqrt()).expect("validated variance"))
        .collect();
    let mut incoming: Vec<Vec<&ScmEdge>> = vec![Vec::new(); n];
    for e in &spec.edges {
        incoming[e.target].push(e);
    }

    // z[t * n + j]
    let mut z = vec![0.0; total * n];
    let at = |z: &[f64], t: isize, i: usize| if t < 0 { 0.0 } else { z[t as usize * n + i] };
    for t in 0..total {
        let ti = t as isize;
        for j in 0..n {
            let mut v = spec.autocoefficients[j] * at(&z, ti - 1, j);
            for e in &incoming[j] {
                let src_t = if e.lag == 0 && e.source > j { ti - 1 } else { ti - e.lag as isize };
                v += e.coupling * e.function.apply(at(&z, src_t, e.source));
            }
            v += noise[j].sample(&mut rng);
            if !v.is_finite() {
                return Err(Error::NonFinite { node: j, time: t });
            }
            z[t * n + j] = v;
        }
    }
    let values = DMatrix::from_fn(spec.length, n, |t, j| z[(spec.burn_in + t) * n + j]);
    let series = MultivariateTimeSeries::new_any_width(values, default_names(n))?;
    Ok(ScmDataset {
        series,
        truth: spec.truth(),
        spec: spec.clone(),
    })
}

/// Per-column standardized difference between first- and second-half means,
/// using an AR(1)-corrected standard error. Values above 5 flag a
/// non-stationary looking column.
pub fn half_mean_z_scores(series: &MultivariateTimeSeries) -> Vec<f64> {
    let r = series.len();
    let h = r / 2;
    (0..series.n_vars())
        .map(|i| {
            let col = series.column(i);
            let m = col.iter().sum::<f64>() / r as f64;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (r - 1) as f64;
            if var == 0.0 {
                return 0.0;
            }
            let rho = col.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / ((r - 1) as f64 * var);
            let rho = rho.clamp(-0.99, 0.99);
            let inflation = (1.0 + rho) / (1.0 - rho);
            let first = col[..h].iter().sum::<f64>() / h as f64;
            let second = col[h..].iter().sum::<f64>() / (r - h) as f64;
            let se = (var * inflation * (1.0 / h as f64 + 1.0 / (r - h) as f64)).sqrt();
            (first - second).abs() / se
        })
        .collect()
}

impl ScmDataset {
    /// Writes `series.csv`, `spec.json` and `truth.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.series.write_csv(&dir.join("series.csv"))?;
        let spec = serde_json::to_string_pretty(&self.spec)?;
        fs::write(dir.join("spec.json"), spec).map_err(|e| Error::io(dir.join("spec.json"), e))?;
        let truth = serde_json::to_string(&self.truth.to_matrix())?;
        fs::write(dir.join("truth.json"), truth).map_err(|e| Error::io(dir.join("truth.json"), e))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let series = crate::series::load_csv(&dir.join("series.csv"), &Default::default())?.series;
        let read = |name: &str| fs::read_to_string(dir.join(name)).map_err(|e| Error::io(dir.join(name), e));
        let spec: ScmSpec = serde_json::from_str(&read("spec.json")?)?;
        let matrix: Vec<Vec<u8>> = serde_json::from_str(&read("truth.json")?)?;
        Ok(Self {
            series,
            truth: CausalGraph::from_matrix(&matrix)?,
            spec,
        })
    }
}
