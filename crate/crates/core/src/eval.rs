//! Point-forecast losses, equal-weight combination and Diebold-Mariano
//! comparison.
//!
//! MAE and MSE follow the multivariate convention: the per-step loss is the
//! L1 (resp. squared L2) norm of the whole `d`-vector error, and the total is
//! divided by `N·H` only, never by `d`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// `H x d` point forecasts issued from `origin_index`, the last known
/// observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastPath {
    pub values: DMatrix<f64>,
    pub origin_index: usize,
}

impl ForecastPath {
    pub fn new(values: DMatrix<f64>, origin_index: usize) -> Self {
        Self { values, origin_index }
    }

    pub fn with_origin(mut self, origin_index: usize) -> Self {
        self.origin_index = origin_index;
        self
    }

    pub fn horizon(&self) -> usize {
        self.values.nrows()
    }

    /// `actual - forecast`, element by element.
    pub fn errors(&self, actual: &DMatrix<f64>) -> DMatrix<f64> {
        actual - &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Absolute,
    Squared,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Absolute => "absolute",
            LossKind::Squared => "squared",
        }
    }

    /// Name of the mean loss: `mae` or `mse`.
    pub fn metric_name(self) -> &'static str {
        match self {
            LossKind::Absolute => "mae",
            LossKind::Squared => "mse",
        }
    }
}

/// Losses of one forecast origin, each summed over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginLoss {
    pub origin: usize,
    /// `Σ_h ||e_h||_1`
    pub abs: f64,
    /// `Σ_h ||e_h||_2²`
    pub sq: f64,
}

impl OriginLoss {
    pub fn from_errors(origin: usize, errors: &DMatrix<f64>) -> Self {
        Self {
            origin,
            abs: horizon_abs(errors),
            sq: horizon_sq(errors),
        }
    }

    pub fn get(&self, kind: LossKind) -> f64 {
        match kind {
            LossKind::Absolute => self.abs,
            LossKind::Squared => self.sq,
        }
    }
}

fn horizon_abs(e: &DMatrix<f64>) -> f64 {
    (0..e.nrows())
        .map(|h| (0..e.ncols()).map(|j| e[(h, j)].abs()).sum::<f64>())
        .sum()
}

fn horizon_sq(e: &DMatrix<f64>) -> f64 {
    (0..e.nrows())
        .map(|h| (0..e.ncols()).map(|j| e[(h, j)] * e[(h, j)]).sum::<f64>())
        .sum()
}

fn check_shapes(errors: &[DMatrix<f64>]) -> Result<usize> {
    let first = errors
        .first()
        .ok_or_else(|| Error::InvalidInput("no forecast errors to evaluate".into()))?;
    let shape = first.shape();
    if shape.0 == 0 || errors.iter().any(|e| e.shape() != shape) {
        return Err(Error::InvalidInput("error matrices must share a non-empty H x d shape".into()));
    }
    Ok(shape.0)
}

pub fn mae(errors: &[DMatrix<f64>]) -> Result<f64> {
    let h = check_shapes(errors)?;
    let total: f64 = errors.iter().map(horizon_abs).sum();
    Ok(total / (errors.len() * h) as f64)
}

pub fn mse(errors: &[DMatrix<f64>]) -> Result<f64> {
    let h = check_shapes(errors)?;
    let total: f64 = errors.iter().map(horizon_sq).sum();
    Ok(total / (errors.len() * h) as f64)
}

/// Same aggregate as [`mae`]/[`mse`] from stored per-origin losses, summed in
/// slice order.
pub fn mean_loss(losses: &[OriginLoss], horizon: usize, kind: LossKind) -> Option<f64> {
    if losses.is_empty() || horizon == 0 {
        return None;
    }
    let total: f64 = losses.iter().map(|l| l.get(kind)).sum();
    Some(total / (losses.len() * horizon) as f64)
}

/// Elementwise mean of two or more paths issued from the same origin.
pub fn combine_equal(paths: &[ForecastPath]) -> Result<ForecastPath> {
    if paths.len() < 2 {
        return Err(Error::InvalidInput("combination needs at least two paths".into()));
    }
    let first = &paths[0];
    if paths
        .iter()
        .any(|p| p.values.shape() != first.values.shape() || p.origin_index != first.origin_index)
    {
        return Err(Error::InvalidInput("paths differ in shape or origin".into()));
    }
    let k = paths.len() as f64;
    // centred on the first path so that identical inputs come back bit-exact
    let values = DMatrix::from_fn(first.values.nrows(), first.values.ncols(), |i, j| {
        let base = first.values[(i, j)];
        base + paths[1..].iter().map(|p| p.values[(i, j)] - base).sum::<f64>() / k
    });
    Ok(ForecastPath::new(values, first.origin_index))
}

/// `(alt - best) / alt`
pub fn relative_improvement(best: f64, alt: f64) -> f64 {
    (alt - best) / alt
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub loss_kind: LossKind,
    /// Bartlett bandwidth used for the long-run variance (0 = sample variance).
    pub bandwidth: usize,
}

/// Diebold-Mariano test on per-origin losses of two forecasters.
///
/// The long-run variance of `δ_n = loss_a(n) − loss_b(n)` is the sample
/// variance plus Bartlett-weighted autocovariances up to `bandwidth`. With
/// randomly sampled origins there is no serial order, so callers pass
/// `bandwidth = 0`. Two-sided p-value from the standard normal.
pub fn dm_test(loss_a: &[f64], loss_b: &[f64], kind: LossKind, bandwidth: usize) -> Result<DmTestResult> {
    if loss_a.len() != loss_b.len() {
        return Err(Error::InvalidInput(format!(
            "loss series lengths differ: {} vs {}",
            loss_a.len(),
            loss_b.len()
        )));
    }
    let n = loss_a.len();
    if n < 10 {
        return Err(Error::InvalidInput(format!("DM test needs at least 10 losses, got {n}")));
    }
    if bandwidth >= n {
        return Err(Error::InvalidInput("bandwidth must be below the sample size".into()));
    }
    let delta: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = delta.iter().sum::<f64>() / nf;
    let dev: Vec<f64> = delta.iter().map(|x| x - mean).collect();
    let autocov = |lag: usize| -> f64 { dev[lag..].iter().zip(&dev).map(|(a, b)| a * b).sum::<f64>() / nf };
    let mut lrv = autocov(0);
    for lag in 1..=bandwidth {
        let w = 1.0 - lag as f64 / (bandwidth as f64 + 1.0);
        lrv += 2.0 * w * autocov(lag);
    }
    if !(lrv > 0.0) || !lrv.is_finite() {
        return Err(Error::DegenerateVariance);
    }
    let statistic = mean / (lrv / nf).sqrt();
    let normal = Normal::standard();
    let p_value = (2.0 * (1.0 - normal.cdf(statistic.abs()))).clamp(0.0, 1.0);
    Ok(DmTestResult {
        statistic,
        p_value,
        n_effective: n,
        loss_kind: kind,
        bandwidth,
    })
}
