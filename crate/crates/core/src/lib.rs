//! Cointegrated VAR forecasting for multi-region wind power.
//!
//! Estimation ([`var`], [`vecm`]), rolling-origin evaluation ([`backtest`],
//! [`eval`]), data ingestion ([`ingest`]), synthetic data ([`simulate`]) and
//! the command-line front end ([`cli`]).

pub mod backtest;
pub mod cli;
pub mod error;
pub mod ingest;
pub mod eval;
pub mod lsq;
pub mod panel;
pub mod simulate;
pub mod var;
pub mod vecm;

pub use backtest::{run_cell, run_grid, sample_origins, summarize_best, BacktestConfig, BacktestGridResult, CellRecord, SummaryRow};
pub use error::{Error, Result};
pub use ingest::{load_panel, write_wide, write_wide_file, IngestOptions, IngestReport};
pub use eval::{combine_equal, dm_test, mae, mse, DmTestResult, ForecastPath, LossKind, OriginLoss};
pub use panel::{build_design, DeterministicSpec, RegressionDesign, TimeSeriesPanel};
pub use simulate::{generate, validate_spec, DgpSpec, SpecDiagnostics};
pub use var::{fit_var, fit_var_with, forecast_var, forecast_var_with, FitOptions, ForecastOptions, VarModel};
pub use vecm::{fit_vecm, fit_vecm_with, forecast_vecm, forecast_vecm_with, var_to_vecm, vecm_to_var, JohansenStage, VecmModel};
