//! Replacement series used to expose a trained forecaster to an
//! interventional environment on one predictor.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knockoff::KnockoffModel;
use crate::rng::RngSeed;
use crate::series::MultivariateTimeSeries;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InterventionKind {
    /// Column of a knockoff sample aligned with the original rows.
    Knockoff,
    /// Variable mean plus Gaussian noise with variance `noise_scale · Var(z_i)`.
    Mean { noise_scale: f64 },
    /// i.i.d. Uniform(min z_i, max z_i).
    Uniform,
    /// i.i.d. `N(μ_i + mean_shift·σ_i, (sd_scale·σ_i)²)`, independent of the data.
    Ood { mean_shift: f64, sd_scale: f64 },
}

impl InterventionKind {
    pub const ALL_TAGS: [&'static str; 4] = ["knockoff", "mean", "uniform", "ood"];

    pub fn mean() -> Self {
        InterventionKind::Mean { noise_scale: 1.0 }
    }

    pub fn ood() -> Self {
        InterventionKind::Ood {
            mean_shift: 3.0,
            sd_scale: 2.0,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            InterventionKind::Knockoff => "knockoff",
            InterventionKind::Mean { .. } => "mean",
            InterventionKind::Uniform => "uniform",
            InterventionKind::Ood { .. } => "ood",
        }
    }

    pub fn needs_knockoffs(&self) -> bool {
        matches!(self, InterventionKind::Knockoff)
    }

    fn validate(&self) -> Result<()> {
        let finite = match *self {
            InterventionKind::Mean { noise_scale } => noise_scale.is_finite() && noise_scale >= 0.0,
            InterventionKind::Ood { mean_shift, sd_scale } => {
                mean_shift.is_finite() && sd_scale.is_finite() && sd_scale >= 0.0
            }
            _ => true,
        };
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad multipliers for {} intervention", self.tag())))
        }
    }
}

impl fmt::Display for InterventionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for InterventionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "knockoff" | "knockoffs" => Ok(InterventionKind::Knockoff),
            "mean" => Ok(InterventionKind::mean()),
            "uniform" => Ok(InterventionKind::Uniform),
            "ood" => Ok(InterventionKind::ood()),
            other => Err(Error::InvalidParameter(format!(
                "unknown intervention kind {other:?} (expected one of {:?})",
                Self::ALL_TAGS
            ))),
        }
    }
}

/// Replacement values for `variable` on `rows` of `series`. Summary
/// statistics for the mean, uniform and ood kinds come from the whole
/// column; knockoff values are the knockoff sample of exactly those rows.
pub fn generate(
    kind: &InterventionKind,
    variable: usize,
    series: &MultivariateTimeSeries,
    knockoffs: Option<&KnockoffModel>,
    seed: &RngSeed,
    rows: Range<usize>,
) -> Result<Vec<f64>> {
    kind.validate()?;
    if variable >= series.n_vars() {
        return Err(Error::InvalidParameter(format!(
            "variable {variable} outside {} columns",
            series.n_vars()
        )));
    }
    if rows.end > series.len() || rows.is_empty() {
        return Err(Error::InvalidParameter(format!("rows {rows:?} outside 0..{}", series.len())));
    }
    let len = rows.len();
    let column = series.column(variable);
    let mut rng = seed.rng();
    match *kind {
        InterventionKind::Knockoff => {
            let model = knockoffs.ok_or(Error::MissingKnockoffModel)?;
            let segment = series.slice_rows(rows)?;
            Ok(model.sample(&segment, seed)?.column(variable))
        }
        InterventionKind::Mean { noise_scale } => {
            let mean = stats::mean(&column);
            let sd = (noise_scale * stats::variance(&column)).sqrt();
            Ok(gaussian_draws(&mut rng, mean, sd, len))
        }
        InterventionKind::Uniform => {
            let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                log::warn!("variable {variable} is constant; uniform intervention falls back to {lo}");
                return Ok(vec![lo; len]);
            }
            Ok((0..len).map(|_| rng.random_range(lo..=hi)).collect())
        }
        InterventionKind::Ood { mean_shift, sd_scale } => {
            let mean = stats::mean(&column);
            let sd = stats::variance(&column).sqrt();
            Ok(gaussian_draws(&mut rng, mean + mean_shift * sd, sd_scale * sd, len))
        }
    }
}

fn gaussian_draws<R: Rng>(rng: &mut R, mean: f64, sd: f64, len: usize) -> Vec<f64> {
    if sd == 0.0 {
        return vec![mean; len];
    }
    let normal = Normal::new(mean, sd).expect("finite sd");
    (0..len).map(|_| normal.sample(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::kolmogorov_q;
    use crate::knockoff::fit_gaussian;
    use rand_distr::StandardNormal;

    fn standard_pair(r: usize, seed: u64) -> MultivariateTimeSeries {
        let mut rng = RngSeed::new(seed, "data").rng();
        let a: Vec<f64> = (0..r).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = a.iter().map(|v| 0.5 * v + rng.sample::<f64, _>(StandardNormal)).collect();
        let s = MultivariateTimeSeries::from_columns(&[a, b]).unwrap();
        crate::series::standardize(&s).0
    }

    #[test]
    fn mean_kind_without_noise_is_the_mean() {
        let s = MultivariateTimeSeries::from_columns(&[vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let kind = InterventionKind::Mean { noise_scale: 0.0 };
        let rep = generate(&kind, 0, &s, None, &RngSeed::new(1, "m"), 0..3).unwrap();
        assert_eq!(rep, vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn uniform_kind_stays_in_range_and_is_uniform() {
        let col: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        let s = MultivariateTimeSeries::from_columns(&[col.clone(), col]).unwrap();
        let mut draws = Vec::new();
        for k in 0..100 {
            draws.extend(generate(&InterventionKind::Uniform, 0, &s, None, &RngSeed::new(k, "u"), 0..101).unwrap());
        }
        let draws = &draws[..10_000];
        assert!(draws.iter().all(|v| (0.0..=1.0).contains(v)));
        // One-sample KS against Uniform(0, 1).
        let mut sorted = draws.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let d = sorted
            .iter()
            .enumerate()
            .map(|(k, &v)| ((k + 1) as f64 / n - v).abs().max((v - k as f64 / n).abs()))
            .fold(0.0, f64::max);
        let p = kolmogorov_q((n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d);
        assert!(p > 0.01, "p {p}");
    }

    #[test]
    fn uniform_on_constant_falls_back() {
        let s = MultivariateTimeSeries::from_columns(&[vec![3.0; 10], vec![1.0; 10]]).unwrap();
        let rep = generate(&InterventionKind::Uniform, 0, &s, None, &RngSeed::new(1, "u"), 0..10).unwrap();
        assert_eq!(rep, vec![3.0; 10]);
    }

    #[test]
    fn ood_kind_moments_and_independence() {
        let s = standard_pair(10_000, 3);
        let rep = generate(&InterventionKind::ood(), 0, &s, None, &RngSeed::new(3, "ood"), 0..10_000).unwrap();
        assert!((stats::mean(&rep) - 3.0).abs() < 0.1);
        assert!((stats::variance(&rep).sqrt() - 2.0).abs() < 0.1);
        assert!(stats::correlation(&rep, &s.column(0)).abs() < 0.05);
    }

    #[test]
    fn knockoff_kind_requires_model_and_preserves_variance() {
        let s = standard_pair(6000, 4);
        let seed = RngSeed::new(4, "knockoff");
        assert!(matches!(
            generate(&InterventionKind::Knockoff, 0, &s, None, &seed, 0..6000),
            Err(Error::MissingKnockoffModel)
        ));
        let model = fit_gaussian(&s).unwrap();
        let rep = generate(&InterventionKind::Knockoff, 1, &s, Some(&model), &seed, 0..6000).unwrap();
        let var = stats::variance(&rep);
        assert!((var - model.base.cov[(1, 1)]).abs() < 0.1 * model.base.cov[(1, 1)], "{var}");
        let ood = generate(&InterventionKind::ood(), 1, &s, None, &seed, 0..6000).unwrap();
        assert!(stats::variance(&ood) > 3.0);
    }

    #[test]
    fn deterministic_and_parsable() {
        let s = standard_pair(200, 5);
        for tag in InterventionKind::ALL_TAGS {
            let kind: InterventionKind = tag.parse().unwrap();
            assert_eq!(kind.tag(), tag);
            let model = fit_gaussian(&s).unwrap();
            let a = generate(&kind, 0, &s, Some(&model), &RngSeed::new(9, "d"), 10..60).unwrap();
            let b = generate(&kind, 0, &s, Some(&model), &RngSeed::new(9, "d"), 10..60).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), 50);
        }
        assert!("bogus".parse::<InterventionKind>().is_err());
    }
}
