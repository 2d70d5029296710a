//! Multivariate time series container, CSV ingestion, standardization and
//! train/forecast splitting.
//!
//! Orientation is fixed everywhere: rows are time steps, columns are variables.

use std::fs::File;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `r × N` matrix of finite observations with variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateTimeSeries {
    values: DMatrix<f64>,
    names: Vec<String>,
    pub sampling: String,
}

impl MultivariateTimeSeries {
    pub fn new(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        Self::validate(&values, &names, 2, 2)?;
        Ok(Self {
            values,
            names,
            sampling: String::new(),
        })
    }

    /// Builds a series without the `N ≥ 2` requirement. Used for scalar
    /// knockoff fits and single-node simulations.
    pub fn new_any_width(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        Self::validate(&values, &names, 2, 1)?;
        Ok(Self {
            values,
            names,
            sampling: String::new(),
        })
    }

    /// Builds a series from rows, naming variables `z1..zN`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidSeries("ragged rows".into()));
        }
        let values = DMatrix::from_fn(rows.len(), n, |t, i| rows[t][i]);
        Self::new_any_width(values, default_names(n))
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let r = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != r) {
            return Err(Error::InvalidSeries("columns differ in length".into()));
        }
        let values = DMatrix::from_fn(r, columns.len(), |t, i| columns[i][t]);
        Self::new_any_width(values, default_names(columns.len()))
    }

    fn validate(values: &DMatrix<f64>, names: &[String], min_rows: usize, min_cols: usize) -> Result<()> {
        if values.nrows() < min_rows {
            return Err(Error::TooFewRows(values.nrows()));
        }
        if values.ncols() < min_cols {
            return Err(Error::InvalidSeries(format!(
                "need at least {min_cols} variables, got {}",
                values.ncols()
            )));
        }
        if names.len() != values.ncols() {
            return Err(Error::DimensionMismatch {
                expected: values.ncols(),
                got: names.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (t, i) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::InvalidSeries(format!(
                "non-finite entry at row {t}, column {}",
                names[i]
            )));
        }
        Ok(())
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars(),
                got: names.len(),
            });
        }
        self.names = names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    #[inline]
    pub fn get(&self, t: usize, i: usize) -> f64 {
        self.values[(t, i)]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.values.column(i).iter().copied().collect()
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.values.row(t).iter().copied().collect()
    }

    /// Contiguous row slice `rows` as a new series.
    pub fn slice_rows(&self, rows: Range<usize>) -> Result<Self> {
        if rows.end > self.len() || rows.start >= rows.end {
            return Err(Error::InvalidParameter(format!(
                "row range {rows:?} outside 0..{}",
                self.len()
            )));
        }
        let values = self.values.rows(rows.start, rows.len()).into_owned();
        Ok(Self {
            values,
            names: self.names.clone(),
            sampling: self.sampling.clone(),
        })
    }

    /// Copy of the series with column `i` replaced.
    pub fn replace_column(&self, i: usize, column: &[f64]) -> Result<Self> {
        if column.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: column.len(),
            });
        }
        let mut out = self.clone();
        for (t, &v) in column.iter().enumerate() {
            out.values[(t, i)] = v;
        }
        Ok(out)
    }

    pub fn column_means(&self) -> Vec<f64> {
        (0..self.n_vars()).map(|i| mean(self.values.column(i).iter().copied())).collect()
    }

    /// Writes the series as CSV with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&self.names)?;
        for t in 0..self.len() {
            w.write_record(self.values.row(t).iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Writes originals and a same-shaped companion series side by side,
    /// the companion's columns suffixed with `suffix`.
    pub fn write_side_by_side(&self, other: &Self, suffix: &str, path: &Path) -> Result<()> {
        if other.values.shape() != self.values.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars(),
                got: other.n_vars(),
            });
        }
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        let header: Vec<String> = self
            .names
            .iter()
            .cloned()
            .chain(self.names.iter().map(|n| format!("{n}{suffix}")))
            .collect();
        writeln!(file, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
        for t in 0..self.len() {
            let row: Vec<String> = self
                .values
                .row(t)
                .iter()
                .chain(other.values.row(t).iter())
                .map(|v| v.to_string())
                .collect();
            writeln!(file, "{}", row.join(",")).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

pub(crate) fn default_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("z{i}")).collect()
}

pub(crate) fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Column selection for [`load_csv`].
#[derive(Debug, Clone, Default)]
pub struct CsvConfig {
    /// Columns to read, in output order. `None` reads every column except
    /// the date column.
    pub columns: Option<Vec<String>>,
    /// Header of a date/time column to skip. When unset and no explicit
    /// column list is given, a first column whose first cell is not numeric
    /// is treated as the date column.
    pub date_column: Option<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub series: MultivariateTimeSeries,
    pub dropped_rows: usize,
}

const MISSING_TOKENS: &[&str] = &["", "na", "nan", "n/a", "null", "none", "-", "?"];

fn is_missing(cell: &str) -> bool {
    let c = cell.trim().to_ascii_lowercase();
    MISSING_TOKENS.contains(&c.as_str())
}

/// Reads a headered, comma-separated file. Rows with a missing value in any
/// selected column are dropped and counted.
pub fn load_csv(path: &Path, config: &CsvConfig) -> Result<LoadedCsv> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;

    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::ColumnNotFound(name.to_string()))
    };
    let date_idx = match &config.date_column {
        Some(name) => Some(find(name)?),
        None if config.columns.is_none() => records
            .first()
            .and_then(|rec| rec.get(0))
            .filter(|cell| !is_missing(cell) && cell.parse::<f64>().is_err())
            .map(|_| 0),
        None => None,
    };
    let selected: Vec<usize> = match &config.columns {
        Some(cols) => cols.iter().map(|c| find(c)).collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&c| Some(c) != date_idx).collect(),
    };
    if selected.is_empty() {
        return Err(Error::InvalidSeries("no numeric columns selected".into()));
    }

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(records.len());
    let mut dropped = 0;
    'rec: for (ri, rec) in records.iter().enumerate() {
        let mut row = Vec::with_capacity(selected.len());
        for &c in &selected {
            let cell = rec.get(c).unwrap_or("");
            if is_missing(cell) {
                dropped += 1;
                continue 'rec;
            }
            let parse_err = || Error::Parse {
                // 1-based data row, header excluded
                row: ri + 1,
                column: headers[c].clone(),
                value: cell.to_string(),
            };
            let v: f64 = cell.parse().map_err(|_| parse_err())?;
            if v.is_nan() {
                dropped += 1;
                continue 'rec;
            }
            if !v.is_finite() {
                return Err(parse_err());
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(Error::TooFewRows(rows.len()));
    }
    let values = DMatrix::from_fn(rows.len(), selected.len(), |t, i| rows[t][i]);
    let names = selected.iter().map(|&c| headers[c].clone()).collect();
    let series = MultivariateTimeSeries::new_any_width(values, names)?;
    Ok(LoadedCsv {
        series,
        dropped_rows: dropped,
    })
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Columns with zero sample variance. These pass through unchanged.
    pub constant: Vec<bool>,
}

impl StandardizationParams {
    /// Estimates per-column mean and sample standard deviation (n − 1).
    pub fn fit(series: &MultivariateTimeSeries) -> Self {
        let r = series.len() as f64;
        let mut mean_v = Vec::with_capacity(series.n_vars());
        let mut sd_v = Vec::with_capacity(series.n_vars());
        let mut constant = Vec::with_capacity(series.n_vars());
        for i in 0..series.n_vars() {
            let col = series.values.column(i);
            let m = col.sum() / r;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (r - 1.0);
            let sd = var.sqrt();
            let is_const = !(sd > 1e-12 * m.abs().max(1.0));
            mean_v.push(m);
            sd_v.push(if is_const { 1.0 } else { sd });
            constant.push(is_const);
        }
        Self {
            mean: mean_v,
            sd: sd_v,
            constant,
        }
    }

    #[inline]
    pub fn forward(&self, i: usize, v: f64) -> f64 {
        if self.constant[i] {
            v
        } else {
            (v - self.mean[i]) / self.sd[i]
        }
    }

    #[inline]
    pub fn inverse(&self, i: usize, v: f64) -> f64 {
        if self.constant[i] {
            v
        } else {
            v * self.sd[i] + self.mean[i]
        }
    }

    pub fn apply(&self, series: &MultivariateTimeSeries) -> Result<MultivariateTimeSeries> {
        self.map(series, Self::forward)
    }

    pub fn invert(&self, series: &MultivariateTimeSeries) -> Result<MultivariateTimeSeries> {
        self.map(series, Self::inverse)
    }

    fn map(
        &self,
        series: &MultivariateTimeSeries,
        f: fn(&Self, usize, f64) -> f64,
    ) -> Result<MultivariateTimeSeries> {
        if series.n_vars() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: series.n_vars(),
            });
        }
        let values = DMatrix::from_fn(series.len(), series.n_vars(), |t, i| f(self, i, series.values[(t, i)]));
        Ok(MultivariateTimeSeries {
            values,
            names: series.names.clone(),
            sampling: series.sampling.clone(),
        })
    }
}

/// Scales every non-constant column to zero mean and unit sample standard
/// deviation.
pub fn standardize(series: &MultivariateTimeSeries) -> (MultivariateTimeSeries, StandardizationParams) {
    let params = StandardizationParams::fit(series);
    let out = params.apply(series).expect("params fitted on this series");
    (out, params)
}

// ---------------------------------------------------------------------------
// Train / forecast split
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TrainForecastSplit {
    pub train: MultivariateTimeSeries,
    pub forecast: MultivariateTimeSeries,
    /// Row index in the source series where the forecast segment begins.
    pub boundary: usize,
}

impl TrainForecastSplit {
    pub fn train_rows(&self) -> Range<usize> {
        0..self.boundary
    }

    pub fn forecast_rows(&self) -> Range<usize> {
        self.boundary..self.boundary + self.forecast.len()
    }
}

/// Splits at `floor(r · train_fraction)`. Both segments must hold at least
/// `lag_depth + window_len` rows.
pub fn split_train_forecast(
    series: &MultivariateTimeSeries,
    train_fraction: f64,
    lag_depth: usize,
    window_len: usize,
) -> Result<TrainForecastSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let r = series.len();
    let boundary = (r as f64 * train_fraction).floor() as usize;
    let min = lag_depth + window_len;
    if boundary < min {
        return Err(Error::SegmentTooShort {
            segment: "train",
            len: boundary,
            min,
        });
    }
    if r - boundary < min {
        return Err(Error::SegmentTooShort {
            segment: "forecast",
            len: r - boundary,
            min,
        });
    }
    Ok(TrainForecastSplit {
        train: series.slice_rows(0..boundary)?,
        forecast: series.slice_rows(boundary..r)?,
        boundary,
    })
}
