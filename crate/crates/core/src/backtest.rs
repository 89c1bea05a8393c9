//! Rolling-origin forecasting study over calibration lengths `T`, lag orders
//! `p` and cointegrating ranks `r`.
//!
//! One origin set is drawn for the whole grid, with the largest `T` as lower
//! bound, so every cell is scored on the same test points. An origin `o` is
//! the last known observation: the model is fitted on rows `o-T+1..=o` and
//! scored on rows `o+1..=o+H`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{mean_loss, relative_improvement, LossKind, OriginLoss};
use crate::panel::{DeterministicSpec, TimeSeriesPanel};
use crate::var::{FitOptions, ForecastOptions};
use crate::vecm::{forecast_vecm_with, JohansenStage, VecmModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub t_grid: Vec<usize>,
    pub p_grid: Vec<usize>,
    /// `None` means every rank `0..=d`.
    pub r_grid: Option<Vec<usize>>,
    pub horizon: usize,
    pub n_origins: usize,
    pub seed: u64,
    pub det: DeterministicSpec,
    pub clip_nonnegative: bool,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            t_grid: vec![96, 192, 384, 768, 1536, 3072],
            p_grid: (1..=7).collect(),
            r_grid: None,
            horizon: 8,
            n_origins: 1000,
            seed: 1,
            det: DeterministicSpec::Constant,
            clip_nonnegative: false,
        }
    }
}

impl BacktestConfig {
    pub fn ranks(&self, d: usize) -> Vec<usize> {
        self.r_grid.clone().unwrap_or_else(|| (0..=d).collect())
    }

    pub fn t_max(&self) -> usize {
        self.t_grid.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.t_grid.is_empty() || self.p_grid.is_empty() || self.ranks(d).is_empty() {
            return Err(Error::InvalidInput("empty T, p or r grid".into()));
        }
        if self.horizon == 0 || self.n_origins == 0 {
            return Err(Error::InvalidInput("horizon and origin count must be positive".into()));
        }
        if self.p_grid.contains(&0) {
            return Err(Error::InvalidInput("lag orders start at 1".into()));
        }
        if let Some(&r) = self.ranks(d).iter().find(|&&r| r > d) {
            return Err(Error::InvalidRank { rank: r, dim: d });
        }
        let p_max = self.p_grid.iter().copied().max().unwrap_or(1);
        if let Some(&t) = self.t_grid.iter().find(|&&t| t < p_max + 2) {
            return Err(Error::InvalidInput(format!(
                "calibration length {t} below max(p) + 2 = {}",
                p_max + 2
            )));
        }
        Ok(())
    }
}

/// Draws `n` distinct origins uniformly from `[t_max, n_obs - horizon - 1]`,
/// returned ascending.
pub fn sample_origins(n_obs: usize, t_max: usize, horizon: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidInput("origin count must be positive".into()));
    }
    let available = n_obs.saturating_sub(t_max + horizon);
    if available < n {
        return Err(Error::InsufficientRange { needed: n, available });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut origins: Vec<usize> = rand::seq::index::sample(&mut rng, available, n)
        .into_iter()
        .map(|i| t_max + i)
        .collect();
    origins.sort_unstable();
    Ok(origins)
}

/// Result of one origin within a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginRecord {
    pub origin: usize,
    /// `H x d` matrix of `Y_{o+h} - Ŷ_{o+h}`, or the estimation failure.
    pub outcome: std::result::Result<DMatrix<f64>, Error>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellOptions {
    pub fit: FitOptions,
    pub forecast: ForecastOptions,
}

fn check_origin(panel: &TimeSeriesPanel, t: usize, horizon: usize, o: usize) -> Result<()> {
    if o + 1 < t || o + horizon >= panel.n_obs() {
        return Err(Error::InvalidInput(format!(
            "origin {o} leaves no room for a window of {t} and horizon {horizon} in {} rows",
            panel.n_obs()
        )));
    }
    Ok(())
}

fn origin_errors(
    panel: &TimeSeriesPanel,
    window: &TimeSeriesPanel,
    model: &VecmModel,
    o: usize,
    horizon: usize,
    opts: &CellOptions,
) -> Result<DMatrix<f64>> {
    let path = forecast_vecm_with(model, window, horizon, opts.forecast)?;
    let actual = panel.values().rows(o + 1, horizon).into_owned();
    Ok(path.errors(&actual))
}

pub fn run_cell(
    panel: &TimeSeriesPanel,
    t: usize,
    p: usize,
    r: usize,
    origins: &[usize],
    horizon: usize,
    det: DeterministicSpec,
) -> Result<Vec<OriginRecord>> {
    run_cell_with(panel, t, p, r, origins, horizon, det, &CellOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn run_cell_with(
    panel: &TimeSeriesPanel,
    t: usize,
    p: usize,
    r: usize,
    origins: &[usize],
    horizon: usize,
    det: DeterministicSpec,
    opts: &CellOptions,
) -> Result<Vec<OriginRecord>> {
    if r > panel.dim() {
        return Err(Error::InvalidRank { rank: r, dim: panel.dim() });
    }
    for &o in origins {
        check_origin(panel, t, horizon, o)?;
    }
    origins
        .par_iter()
        .map(|&o| {
            let window = panel.window(o + 1 - t, t)?;
            let outcome = JohansenStage::new(&window, p, det, &opts.fit)
                .and_then(|stage| stage.model(r))
                .and_then(|model| origin_errors(panel, &window, &model, o, horizon, opts));
            Ok(OriginRecord { origin: o, outcome })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub t: usize,
    pub p: usize,
    pub r: usize,
    /// Absent when every origin failed.
    pub mae: Option<f64>,
    pub mse: Option<f64>,
    pub n_failed: usize,
    /// Successful origins only, in origin order.
    pub per_origin_losses: Vec<OriginLoss>,
    /// Error kind of the first failed origin.
    pub first_failure: Option<String>,
}

impl CellRecord {
    pub fn metric(&self, kind: LossKind) -> Option<f64> {
        match kind {
            LossKind::Absolute => self.mae,
            LossKind::Squared => self.mse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    pub seed: u64,
    pub data_fingerprint: String,
    pub first_timestamp: String,
    pub last_timestamp: String,
    pub n_obs: usize,
    pub d: usize,
    pub labels: Vec<String>,
    pub horizon: usize,
    pub n_origins: usize,
    pub det: DeterministicSpec,
    pub clip_nonnegative: bool,
    /// How origins relate across calibration lengths.
    pub origin_policy: String,
    pub dm_variant: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestGridResult {
    /// Ordered by `T`, then `p`, then `r` as listed in the config.
    pub cells: Vec<CellRecord>,
    pub origins: Vec<usize>,
    pub metadata: GridMetadata,
}

impl BacktestGridResult {
    pub fn cell(&self, t: usize, p: usize, r: usize) -> Option<&CellRecord> {
        self.cells.iter().find(|c| c.t == t && c.p == p && c.r == r)
    }

    pub fn t_values(&self) -> Vec<usize> {
        let mut ts: Vec<usize> = Vec::new();
        for c in &self.cells {
            if !ts.contains(&c.t) {
                ts.push(c.t);
            }
        }
        ts
    }
}

/// SHA-256 over region labels and the little-endian bytes of every value.
pub fn fingerprint(panel: &TimeSeriesPanel) -> String {
    let mut h = Sha256::new();
    for l in panel.labels() {
        h.update(l.as_bytes());
        h.update([0u8]);
    }
    for v in panel.values().iter() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn run_grid(panel: &TimeSeriesPanel, config: &BacktestConfig) -> Result<BacktestGridResult> {
    run_grid_with(panel, config, &FitOptions::default())
}

pub fn run_grid_with(panel: &TimeSeriesPanel, config: &BacktestConfig, fit: &FitOptions) -> Result<BacktestGridResult> {
    let d = panel.dim();
    config.validate(d)?;
    let ranks = config.ranks(d);
    let horizon = config.horizon;
    let origins = sample_origins(panel.n_obs(), config.t_max(), horizon, config.n_origins, config.seed)?;
    let opts = CellOptions {
        fit: *fit,
        forecast: ForecastOptions {
            clip_nonnegative: config.clip_nonnegative,
        },
    };

    // one Johansen first stage per (T, p, origin), shared by every rank
    let n = origins.len();
    let tasks: Vec<(usize, usize, usize)> = config
        .t_grid
        .iter()
        .flat_map(|&t| config.p_grid.iter().flat_map(move |&p| (0..n).map(move |i| (t, p, i))))
        .collect();
    let outcomes: Vec<Vec<std::result::Result<OriginLoss, Error>>> = tasks
        .par_iter()
        .map(|&(t, p, i)| {
            let o = origins[i];
            let window = match panel.window(o + 1 - t, t) {
                Ok(w) => w,
                Err(e) => return vec![Err(e); ranks.len()],
            };
            let stage = JohansenStage::new(&window, p, config.det, &opts.fit);
            ranks
                .iter()
                .map(|&r| {
                    let stage = stage.as_ref().map_err(Clone::clone)?;
                    let model = stage.model(r)?;
                    let errors = origin_errors(panel, &window, &model, o, horizon, &opts)?;
                    Ok(OriginLoss::from_errors(o, &errors))
                })
                .collect()
        })
        .collect();

    let mut cells = Vec::with_capacity(config.t_grid.len() * config.p_grid.len() * ranks.len());
    for (block, chunk) in outcomes.chunks(n).enumerate() {
        let (t, p, _) = tasks[block * n];
        for (ri, &r) in ranks.iter().enumerate() {
            let mut losses = Vec::with_capacity(n);
            let mut n_failed = 0;
            let mut first_failure = None;
            for per_rank in chunk {
                match &per_rank[ri] {
                    Ok(l) => losses.push(*l),
                    Err(e) => {
                        n_failed += 1;
                        first_failure.get_or_insert_with(|| e.kind_name().to_string());
                    }
                }
            }
            cells.push(CellRecord {
                t,
                p,
                r,
                mae: mean_loss(&losses, horizon, LossKind::Absolute),
                mse: mean_loss(&losses, horizon, LossKind::Squared),
                n_failed,
                per_origin_losses: losses,
                first_failure,
            });
        }
    }

    let ts = panel.timestamps();
    Ok(BacktestGridResult {
        cells,
        origins,
        metadata: GridMetadata {
            seed: config.seed,
            data_fingerprint: fingerprint(panel),
            first_timestamp: ts[0].to_rfc3339(),
            last_timestamp: ts[ts.len() - 1].to_rfc3339(),
            n_obs: panel.n_obs(),
            d,
            labels: panel.labels().to_vec(),
            horizon,
            n_origins: config.n_origins,
            det: config.det,
            clip_nonnegative: config.clip_nonnegative,
            origin_policy: "shared across all (T, p, r) cells; lower bound max(T)".into(),
            dm_variant: "two-sided normal, lag-0 sample variance of per-origin loss differentials".into(),
        },
    })
}

/// Winner of one calibration length, in the layout of the summary tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub t: usize,
    pub best_p: Option<usize>,
    pub best_r: Option<usize>,
    pub best_loss: Option<f64>,
    /// Against the best rank-0 cell (VAR on differences).
    pub improvement_vs_diff_var: Option<f64>,
    /// Against the best full-rank cell (VAR on levels).
    pub improvement_vs_level_var: Option<f64>,
    pub note: Option<String>,
}

/// Per-`T` argmin over cells that succeeded at every origin. Cells with
/// failures are scored on a different origin subset and are skipped.
pub fn summarize_best(result: &BacktestGridResult, kind: LossKind) -> Result<Vec<SummaryRow>> {
    if result.cells.is_empty() {
        return Err(Error::InvalidInput("empty grid result".into()));
    }
    let d = result.metadata.d;
    let rows = result
        .t_values()
        .into_iter()
        .map(|t| {
            let eligible: Vec<(&CellRecord, f64)> = result
                .cells
                .iter()
                .filter(|c| c.t == t && c.n_failed == 0)
                .filter_map(|c| c.metric(kind).map(|v| (c, v)))
                .collect();
            let argmin = |pred: &dyn Fn(&CellRecord) -> bool| -> Option<(&CellRecord, f64)> {
                eligible
                    .iter()
                    .filter(|(c, _)| pred(c))
                    .fold(None, |best: Option<(&CellRecord, f64)>, &(c, v)| match best {
                        Some((_, bv)) if bv <= v => best,
                        _ => Some((c, v)),
                    })
            };
            let Some((best, loss)) = argmin(&|_| true) else {
                let failed = result.cells.iter().filter(|c| c.t == t).count();
                return SummaryRow {
                    t,
                    best_p: None,
                    best_r: None,
                    best_loss: None,
                    improvement_vs_diff_var: None,
                    improvement_vs_level_var: None,
                    note: Some(format!("all {failed} cells failed at one or more origins")),
                };
            };
            let diff = argmin(&|c| c.r == 0).map(|(_, v)| relative_improvement(loss, v));
            let level = argmin(&|c| c.r == d).map(|(_, v)| relative_improvement(loss, v));
            let skipped = result.cells.iter().filter(|c| c.t == t && c.n_failed > 0).count();
            SummaryRow {
                t,
                best_p: Some(best.p),
                best_r: Some(best.r),
                best_loss: Some(loss),
                improvement_vs_diff_var: diff,
                improvement_vs_level_var: level,
                note: (skipped > 0).then(|| format!("{skipped} cells with failed origins excluded")),
            }
        })
        .collect();
    Ok(rows)
}
