//! Multivariate time-series container and the lag/difference design
//! matrices shared by every estimator.
//!
//! Stacked lag blocks use a lag-major, region-minor column layout: the block
//! for lags `1..=p` is `[Y_{t-1} | Y_{t-2} | ... | Y_{t-p}]`, each group `d`
//! columns wide in panel region order.

use chrono::{DateTime, Duration, TimeZone, Utc};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling interval of every panel (quarter-hourly data).
pub const SLOT_SECONDS: i64 = 15 * 60;

/// Deterministic regressors entering every equation unrestricted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeterministicSpec {
    None,
    #[default]
    Constant,
}

impl DeterministicSpec {
    /// Number of deterministic columns `m`.
    pub fn columns(self) -> usize {
        match self {
            DeterministicSpec::None => 0,
            DeterministicSpec::Constant => 1,
        }
    }

    /// Deterministic regressor row for a time index. Only the constant ships,
    /// so the index is unused.
    pub fn row(self, _t: usize) -> Vec<f64> {
        vec![1.0; self.columns()]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DeterministicSpec::None => "none",
            DeterministicSpec::Constant => "constant",
        }
    }
}

impl std::str::FromStr for DeterministicSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DeterministicSpec::None),
            "constant" => Ok(DeterministicSpec::Constant),
            other => Err(Error::InvalidInput(format!(
                "unknown deterministic term `{other}` (expected none or constant)"
            ))),
        }
    }
}

impl std::fmt::Display for DeterministicSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `n_obs x d` matrix of observations on a uniform 15-minute clock.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    values: DMatrix<f64>,
    timestamps: Vec<DateTime<Utc>>,
    labels: Vec<String>,
}

impl TimeSeriesPanel {
    pub fn new(
        values: DMatrix<f64>,
        timestamps: Vec<DateTime<Utc>>,
        labels: Vec<String>,
    ) -> Result<Self> {
        let (n, d) = values.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "panel must have at least one row and one column, got {n}x{d}"
            )));
        }
        if timestamps.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} timestamps for {n} rows",
                timestamps.len()
            )));
        }
        if labels.len() != d {
            return Err(Error::InvalidInput(format!(
                "{} labels for {d} columns",
                labels.len()
            )));
        }
        let step = Duration::seconds(SLOT_SECONDS);
        if let Some(w) = timestamps.windows(2).position(|w| w[1] - w[0] != step) {
            return Err(Error::InvalidInput(format!(
                "timestamps not on a uniform 15-minute grid at row {}",
                w + 1
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {}, column {}",
                i % n,
                i / n
            )));
        }
        Ok(Self {
            values,
            timestamps,
            labels,
        })
    }

    /// Panel with synthetic labels `y1..yd` and a clock starting at
    /// 2015-01-01T00:00Z.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        let (n, d) = values.shape();
        let start = Utc.with_ymd_and_hms(2015, 1, 1, 0, 0, 0).unwrap();
        let timestamps = regular_clock(start, n);
        let labels = (1..=d).map(|j| format!("y{j}")).collect();
        Self::new(values, timestamps, labels)
    }

    /// Convenience constructor from row vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        Self::from_values(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn timestamps(&self) -> &[DateTime<Utc>] {
        &self.timestamps
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Observation `t` as a plain vector.
    pub fn row(&self, t: usize) -> Vec<f64> {
        self.values.row(t).iter().copied().collect()
    }

    /// Rows `start..start + len`.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.n_obs() {
            return Err(Error::InvalidInput(format!(
                "window {start}..{} outside panel of {} rows",
                start + len,
                self.n_obs()
            )));
        }
        Ok(Self {
            values: self.values.rows(start, len).into_owned(),
            timestamps: self.timestamps[start..start + len].to_vec(),
            labels: self.labels.clone(),
        })
    }

    /// Reorders regions: output column `j` is input column `order[j]`.
    pub fn permute_regions(&self, order: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut seen = vec![false; d];
        if order.len() != d || order.iter().any(|&j| j >= d || std::mem::replace(&mut seen[j], true)) {
            return Err(Error::InvalidInput("not a permutation of the regions".into()));
        }
        Ok(Self {
            values: self.values.select_columns(order),
            timestamps: self.timestamps.clone(),
            labels: order.iter().map(|&j| self.labels[j].clone()).collect(),
        })
    }

    /// First differences; row `t` of the result is `Y_{t+1} - Y_t`, stamped
    /// with the later instant.
    pub fn difference(&self) -> Result<Self> {
        let n = self.n_obs();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "differencing needs at least 2 observations, got {n}"
            )));
        }
        let d = self.dim();
        let values = DMatrix::from_fn(n - 1, d, |i, j| self.values[(i + 1, j)] - self.values[(i, j)]);
        Ok(Self {
            values,
            timestamps: self.timestamps[1..].to_vec(),
            labels: self.labels.clone(),
        })
    }
}

impl TimeSeriesPanel {
    /// Running column sums (inverse of [`difference`](Self::difference) up to
    /// the first row).
    pub fn cumulative(&self) -> Self {
        let mut values = self.values.clone();
        for j in 0..values.ncols() {
            let mut acc = 0.0;
            for v in values.column_mut(j).iter_mut() {
                acc += *v;
                *v = acc;
            }
        }
        Self {
            values,
            timestamps: self.timestamps.clone(),
            labels: self.labels.clone(),
        }
    }
}

pub(crate) fn regular_clock(start: DateTime<Utc>, n: usize) -> Vec<DateTime<Utc>> {
    (0..n)
        .map(|i| start + Duration::seconds(SLOT_SECONDS * i as i64))
        .collect()
}

/// Aligned regression blocks for lag order `p`. Row `i` corresponds to time
/// index `t = p + i` of the source panel.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDesign {
    pub p: usize,
    pub det: DeterministicSpec,
    /// `Y_t`
    pub response: DMatrix<f64>,
    /// `[Y_{t-1} | ... | Y_{t-p}]`
    pub lag_block: DMatrix<f64>,
    /// `ΔY_t`
    pub diff_response: DMatrix<f64>,
    /// `Y_{t-1}`
    pub lagged_level: DMatrix<f64>,
    /// `[ΔY_{t-1} | ... | ΔY_{t-p+1}]`
    pub diff_lag_block: DMatrix<f64>,
    pub deterministic_block: DMatrix<f64>,
}

impl RegressionDesign {
    pub fn effective_n(&self) -> usize {
        self.response.nrows()
    }
}

pub fn build_design(panel: &TimeSeriesPanel, p: usize, det: DeterministicSpec) -> Result<RegressionDesign> {
    if p == 0 {
        return Err(Error::InvalidInput("lag order must be at least 1".into()));
    }
    let n = panel.n_obs();
    if n <= p {
        return Err(Error::InsufficientData {
            needed: p + 1,
            available: n,
        });
    }
    let y = panel.values();
    let d = panel.dim();
    let ne = n - p;
    let m = det.columns();

    let response = y.rows(p, ne).into_owned();
    let lagged_level = y.rows(p - 1, ne).into_owned();
    let lag_block = DMatrix::from_fn(ne, d * p, |i, c| {
        let (lag, j) = (c / d + 1, c % d);
        y[(p + i - lag, j)]
    });
    let diff_response = DMatrix::from_fn(ne, d, |i, j| y[(p + i, j)] - y[(p + i - 1, j)]);
    let diff_lag_block = DMatrix::from_fn(ne, d * (p - 1), |i, c| {
        let (lag, j) = (c / d + 1, c % d);
        let t = p + i - lag;
        y[(t, j)] - y[(t - 1, j)]
    });
    let deterministic_block = DMatrix::from_fn(ne, m, |i, c| det.row(p + i)[c]);

    Ok(RegressionDesign {
        p,
        det,
        response,
        lag_block,
        diff_response,
        lagged_level,
        diff_lag_block,
        deterministic_block,
    })
}

/// Horizontally concatenates blocks with equal row counts.
pub(crate) fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = blocks.first().map_or(0, |b| b.nrows());
    let k: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, k);
    let mut c = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), n);
        out.columns_mut(c, b.ncols()).copy_from(b);
        c += b.ncols();
    }
    out
}
