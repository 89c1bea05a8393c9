//! Command-line surface: `fit`, `backtest`, `combine`, `simulate`, `ingest`.
//!
//! Exit status is 0 on success, 1 on a command-level error (printed as
//! `error[<kind>]: <message>`) and 2 when a backtest or combination completed
//! but some origins failed to estimate.
//!
//! Backtest output directory:
//!
//! * `grid.csv`: `T,p,r,mae,mse,n_ok,n_failed`; metrics as `{:.16e}`, empty
//!   when every origin failed;
//! * `records.csv`: long form `T,p,r,metric,value` for plotting;
//! * `summary_mae.csv`, `summary_mse.csv`: best cell per `T` and relative
//!   improvements over the best rank-0 and rank-d cells;
//! * `origins.csv`: `origin,timestamp`, the shared origin set;
//! * `failures.csv`: `T,p,r,n_failed,first_failure`;
//! * `metadata.toml`: seed, data fingerprint, span and settings.

pub mod model_file;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::backtest::{fingerprint, run_grid, sample_origins, summarize_best, BacktestConfig, BacktestGridResult, SummaryRow};
use crate::error::{Error, Result};
use crate::eval::{combine_equal, dm_test, mean_loss, ForecastPath, LossKind, OriginLoss};
use crate::ingest::{load_panel, write_wide_file, IngestOptions};
use crate::panel::{DeterministicSpec, TimeSeriesPanel};
use crate::simulate::{generate, validate_spec, DgpSpec};
use crate::var::{fit_var, FitOptions, ForecastOptions};
use crate::vecm::{forecast_vecm_with, JohansenStage};
use model_file::{ModelFile, StoredModel};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "COINTCAST_THREADS";

#[derive(Debug, Parser)]
#[command(name = "cointcast", version, about = "Cointegrated VAR forecasting for multi-region wind power")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one VECM (with --rank) or levels VAR (without) and write the model file.
    Fit(FitArgs),
    /// Rolling-origin study over calibration lengths, lag orders and ranks.
    Backtest(BacktestArgs),
    /// Evaluate two models and their equal-weight combination on shared origins.
    Combine(CombineArgs),
    /// Simulate a panel from a DGP spec or preset and write it as wide CSV.
    Simulate(SimulateArgs),
    /// Clean and align input files and write the resulting wide CSV.
    Ingest(IngestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// d = 4, two cointegrating relations, one lagged difference.
    #[value(name = "coint-d4-r2")]
    CointD4R2,
    /// Independent Gaussian random walks.
    RandomWalk,
    /// Stationary VAR(1) with coefficient 0.5 I.
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricChoice {
    Mae,
    Mse,
    Both,
}

impl MetricChoice {
    fn kinds(self) -> Vec<LossKind> {
        match self {
            MetricChoice::Mae => vec![LossKind::Absolute],
            MetricChoice::Mse => vec![LossKind::Squared],
            MetricChoice::Both => vec![LossKind::Absolute, LossKind::Squared],
        }
    }
}

/// Exactly one of `--data`, `--sim`, `--preset`.
#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false, id = "source")]
pub struct SourceArgs {
    /// Input files, long (`timestamp,region,value`) or wide layout.
    #[arg(long, num_args = 1.., value_name = "FILE")]
    pub data: Option<Vec<PathBuf>>,
    /// DGP spec in TOML.
    #[arg(long, value_name = "SPEC")]
    pub sim: Option<PathBuf>,
    /// Built-in DGP.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Clone, Args)]
pub struct SourceOptions {
    /// Observations simulated for --preset.
    #[arg(long, default_value_t = 6000)]
    pub n_obs: usize,
    /// Dimension for the random-walk and stationary presets.
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    /// Seed of the simulated noise for --preset.
    #[arg(long, default_value_t = 0)]
    pub dgp_seed: u64,
    /// Longest interpolated gap in 15-minute slots (--data).
    #[arg(long, default_value_t = 8)]
    pub max_gap: usize,
    /// Required number of regions (--data).
    #[arg(long)]
    pub regions: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Deterministic term.
    #[arg(long, default_value = "constant")]
    pub det: DeterministicSpec,
    /// Clip forecasts at zero.
    #[arg(long)]
    pub clip0: bool,
    /// Worker threads; 0 uses all cores.
    #[arg(long, env = THREADS_ENV, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub source_opts: SourceOptions,
    #[command(flatten)]
    pub common: Common,
    /// Lag order in levels.
    #[arg(long)]
    pub p: usize,
    /// Cointegrating rank; omit for a VAR in levels.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Fit on the last WINDOW observations only.
    #[arg(long)]
    pub window: Option<usize>,
    /// Model file to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub source_opts: SourceOptions,
    #[command(flatten)]
    pub common: Common,
    /// Calibration lengths T.
    #[arg(long, value_delimiter = ',', default_values_t = [96, 192, 384, 768, 1536, 3072])]
    pub window: Vec<usize>,
    /// Lag orders.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5, 6, 7])]
    pub p: Vec<usize>,
    /// Ranks; default 0..=d.
    #[arg(long, value_delimiter = ',')]
    pub rank: Option<Vec<usize>>,
    #[arg(long, default_value_t = 8)]
    pub horizon: usize,
    /// Number of forecast origins.
    #[arg(long, default_value_t = 1000)]
    pub origins: usize,
    /// Seed of the origin draw.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = MetricChoice::Both)]
    pub metric: MetricChoice,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

/// `P:R`, or `P:var` for a VAR in levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub p: usize,
    pub rank: Option<usize>,
}

impl std::str::FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (p, r) = s.split_once(':').ok_or_else(|| format!("expected P:R, got `{s}`"))?;
        let p = p.parse().map_err(|_| format!("bad lag order `{p}`"))?;
        let rank = match r {
            "var" => None,
            r => Some(r.parse().map_err(|_| format!("bad rank `{r}`"))?),
        };
        Ok(Self { p, rank })
    }
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.rank {
            Some(r) => write!(f, "p={} r={r}", self.p),
            None => write!(f, "p={} var", self.p),
        }
    }
}

#[derive(Debug, Args)]
pub struct CombineArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub source_opts: SourceOptions,
    #[command(flatten)]
    pub common: Common,
    /// First model as P:R.
    #[arg(long)]
    pub a: ModelSpec,
    /// Second model as P:R.
    #[arg(long)]
    pub b: ModelSpec,
    /// Calibration length T.
    #[arg(long)]
    pub window: usize,
    /// Smallest admissible origin; default T. Set to the largest T of a grid
    /// to reuse its origins.
    #[arg(long)]
    pub origin_floor: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub horizon: usize,
    #[arg(long, default_value_t = 1000)]
    pub origins: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = MetricChoice::Both)]
    pub metric: MetricChoice,
    /// Bartlett bandwidth of the DM variance; 0 is the plain sample variance.
    #[arg(long, default_value_t = 0)]
    pub bandwidth: usize,
    /// Per-origin losses as CSV.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub source_opts: SourceOptions,
    /// Wide CSV to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Also write the resolved spec as TOML.
    #[arg(long, value_name = "FILE")]
    pub write_spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long, num_args = 1.., value_name = "FILE", required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub max_gap: usize,
    #[arg(long)]
    pub regions: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(Outcome::Clean) => 0,
        Ok(Outcome::PartialFailure) => 2,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind_name());
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    /// Outputs were written but some origins failed to estimate.
    PartialFailure,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Fit(a) => with_threads(a.common.threads, || cmd_fit(&a)),
        Command::Backtest(a) => with_threads(a.common.threads, || cmd_backtest(&a)),
        Command::Combine(a) => with_threads(a.common.threads, || cmd_combine(&a)),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Ingest(a) => cmd_ingest(&a),
    }
}

fn with_threads<F: FnOnce() -> Result<Outcome> + Send>(threads: usize, f: F) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn resolve_spec(source: &SourceArgs, opts: &SourceOptions) -> Result<Option<DgpSpec>> {
    if let Some(path) = &source.sim {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let spec: DgpSpec = toml::from_str(&text).map_err(|e| Error::InvalidSpec(format!("{}: {e}", path.display())))?;
        return Ok(Some(spec));
    }
    Ok(source.preset.map(|p| match p {
        Preset::CointD4R2 => DgpSpec::cointegrated_d4_r2(opts.n_obs, opts.dgp_seed),
        Preset::RandomWalk => DgpSpec::random_walk(opts.dim, opts.n_obs, opts.dgp_seed),
        Preset::Stationary => DgpSpec::stationary(opts.dim, opts.n_obs, opts.dgp_seed),
    }))
}

/// Loads the panel named by the source flags; ingestion reports go to stderr.
pub fn load_source(source: &SourceArgs, opts: &SourceOptions) -> Result<TimeSeriesPanel> {
    if let Some(paths) = &source.data {
        let ingest = IngestOptions {
            max_gap: opts.max_gap,
            expected_regions: opts.regions,
        };
        let (panel, report) = load_panel(paths, &ingest)?;
        eprintln!(
            "ingest: {} rows read, {} regions, {} gaps filled, {} duplicates resolved, {} rows dropped, span {} .. {}",
            report.rows_read,
            report.regions_found.len(),
            report.gaps_filled,
            report.duplicates_resolved,
            report.rows_dropped,
            report.coverage_span.0,
            report.coverage_span.1
        );
        return Ok(panel);
    }
    let spec = resolve_spec(source, opts)?.ok_or_else(|| Error::InvalidInput("no data source".into()))?;
    generate(&spec)
}

fn last_window(panel: TimeSeriesPanel, window: Option<usize>) -> Result<TimeSeriesPanel> {
    match window {
        None => Ok(panel),
        Some(t) if t <= panel.n_obs() => panel.window(panel.n_obs() - t, t),
        Some(t) => Err(Error::InsufficientData {
            needed: t,
            available: panel.n_obs(),
        }),
    }
}

fn fit_model(panel: &TimeSeriesPanel, p: usize, rank: Option<usize>, det: DeterministicSpec) -> Result<StoredModel> {
    match rank {
        Some(r) => JohansenStage::new(panel, p, det, &FitOptions::default())?
            .model(r)
            .map(StoredModel::Vecm),
        None => fit_var(panel, p, det).map(StoredModel::Var),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ")
}

pub fn cmd_fit(args: &FitArgs) -> Result<Outcome> {
    let panel = last_window(load_source(&args.source, &args.source_opts)?, args.window)?;
    let model = fit_model(&panel, args.p, args.rank, args.common.det)?;
    let file = ModelFile {
        labels: panel.labels().to_vec(),
        model,
    };
    model_file::write(&args.out, &file)?;

    let var = file.model.var_form();
    let mut s = String::new();
    match &file.model {
        StoredModel::Vecm(m) => {
            writeln!(s, "VECM p={} r={} d={} det={} n={}", m.p(), m.rank(), m.dim(), m.det, panel.n_obs()).unwrap();
            writeln!(s, "eigenvalues: {}", fmt_list(&m.eigenvalues)).unwrap();
        }
        StoredModel::Var(m) => {
            writeln!(s, "VAR p={} d={} det={} n={}", m.p(), m.dim(), m.det, panel.n_obs()).unwrap();
        }
    }
    let diag: Vec<f64> = var.resid_cov.diagonal().iter().copied().collect();
    writeln!(s, "resid_cov diagonal: {}", fmt_list(&diag)).unwrap();
    writeln!(s, "model written to {}", args.out.display()).unwrap();
    print!("{s}");
    Ok(Outcome::Clean)
}

fn opt_sci(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

fn opt_fixed(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into())
}

fn opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

/// `T,p,r,mae,mse,n_ok,n_failed`
pub fn render_grid(result: &BacktestGridResult) -> String {
    let mut s = String::from("T,p,r,mae,mse,n_ok,n_failed\n");
    for c in &result.cells {
        let n_ok = c.per_origin_losses.len();
        writeln!(s, "{},{},{},{},{},{},{}", c.t, c.p, c.r, opt_sci(c.mae), opt_sci(c.mse), n_ok, c.n_failed).unwrap();
    }
    s
}

fn render_records(result: &BacktestGridResult, kinds: &[LossKind]) -> String {
    let mut s = String::from("T,p,r,metric,value\n");
    for c in &result.cells {
        for &k in kinds {
            if let Some(v) = c.metric(k) {
                writeln!(s, "{},{},{},{},{v:.16e}", c.t, c.p, c.r, k.metric_name()).unwrap();
            }
        }
    }
    s
}

fn render_summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("T,best_p,best_r,best_loss,improvement_vs_diff_var,improvement_vs_level_var,note\n");
    for r in rows {
        let usz = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.t,
            usz(r.best_p),
            usz(r.best_r),
            opt_sci(r.best_loss),
            opt_sci(r.improvement_vs_diff_var),
            opt_sci(r.improvement_vs_level_var),
            r.note.as_deref().unwrap_or("").replace(',', ";")
        )
        .unwrap();
    }
    s
}

/// Rows are the table entries, columns the calibration lengths.
pub fn render_summary_table(rows: &[SummaryRow], kind: LossKind) -> String {
    let mut lines: Vec<(String, Vec<String>)> = vec![
        ("T".into(), rows.iter().map(|r| r.t.to_string()).collect()),
        ("Best p".into(), rows.iter().map(|r| opt_usize(r.best_p)).collect()),
        ("Best r".into(), rows.iter().map(|r| opt_usize(r.best_r)).collect()),
        (
            "Improvement to best VAR on ΔY_t".into(),
            rows.iter().map(|r| opt_fixed(r.improvement_vs_diff_var)).collect(),
        ),
        (
            "Improvement to best VAR on Y_t".into(),
            rows.iter().map(|r| opt_fixed(r.improvement_vs_level_var)).collect(),
        ),
    ];
    let label_w = lines.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0);
    let col_w = lines.iter().flat_map(|(_, v)| v.iter().map(String::len)).max().unwrap_or(0);
    let mut s = format!("{} summary\n", kind.metric_name().to_uppercase());
    for (label, vals) in lines.drain(..) {
        let pad = label_w - label.chars().count();
        write!(s, "{label}{}", " ".repeat(pad)).unwrap();
        for v in vals {
            write!(s, "  {v:>col_w$}").unwrap();
        }
        s.push('\n');
    }
    for r in rows {
        if let Some(note) = &r.note {
            writeln!(s, "  T={}: {note}", r.t).unwrap();
        }
    }
    s
}

pub fn cmd_backtest(args: &BacktestArgs) -> Result<Outcome> {
    let panel = load_source(&args.source, &args.source_opts)?;
    let config = BacktestConfig {
        t_grid: args.window.clone(),
        p_grid: args.p.clone(),
        r_grid: args.rank.clone(),
        horizon: args.horizon,
        n_origins: args.origins,
        seed: args.seed,
        det: args.common.det,
        clip_nonnegative: args.common.clip0,
    };
    let result = run_grid(&panel, &config)?;

    std::fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    let kinds = args.metric.kinds();
    write_text(&args.out.join("grid.csv"), &render_grid(&result))?;
    write_text(&args.out.join("records.csv"), &render_records(&result, &kinds))?;

    let mut origins = String::from("origin,timestamp\n");
    for &o in &result.origins {
        writeln!(origins, "{o},{}", panel.timestamps()[o].to_rfc3339()).unwrap();
    }
    write_text(&args.out.join("origins.csv"), &origins)?;

    let mut failures = String::from("T,p,r,n_failed,first_failure\n");
    for c in result.cells.iter().filter(|c| c.n_failed > 0) {
        let msg = c.first_failure.as_deref().unwrap_or("").replace(['"', '\n'], " ");
        writeln!(failures, "{},{},{},{},\"{msg}\"", c.t, c.p, c.r, c.n_failed).unwrap();
    }
    write_text(&args.out.join("failures.csv"), &failures)?;

    let meta = toml::to_string(&result.metadata).map_err(|e| Error::Io(e.to_string()))?;
    write_text(&args.out.join("metadata.toml"), &meta)?;

    for kind in kinds {
        let rows = summarize_best(&result, kind)?;
        write_text(&args.out.join(format!("summary_{}.csv", kind.metric_name())), &render_summary_csv(&rows))?;
        println!("{}", render_summary_table(&rows, kind));
    }
    let failed = result.cells.iter().filter(|c| c.n_failed > 0).count();
    println!(
        "{} cells, {} origins, {} cells with failed origins; results in {}",
        result.cells.len(),
        result.origins.len(),
        failed,
        args.out.display()
    );
    Ok(if failed > 0 { Outcome::PartialFailure } else { Outcome::Clean })
}

fn forecast_spec(
    window: &TimeSeriesPanel,
    spec: ModelSpec,
    det: DeterministicSpec,
    horizon: usize,
    forecast: ForecastOptions,
) -> Result<ForecastPath> {
    match fit_model(window, spec.p, spec.rank, det)? {
        StoredModel::Vecm(m) => forecast_vecm_with(&m, window, horizon, forecast),
        StoredModel::Var(m) => crate::var::forecast_var_with(&m, window, horizon, forecast),
    }
}

struct CombinedOrigin {
    a: OriginLoss,
    b: OriginLoss,
    c: OriginLoss,
}

pub fn cmd_combine(args: &CombineArgs) -> Result<Outcome> {
    let panel = load_source(&args.source, &args.source_opts)?;
    let t = args.window;
    let floor = args.origin_floor.unwrap_or(t).max(t);
    let h = args.horizon;
    let origins = sample_origins(panel.n_obs(), floor, h, args.origins, args.seed)?;
    let forecast = ForecastOptions {
        clip_nonnegative: args.common.clip0,
    };
    let det = args.common.det;

    let outcomes: Vec<Result<CombinedOrigin>> = origins
        .par_iter()
        .map(|&o| {
            let window = panel.window(o + 1 - t, t)?;
            let pa = forecast_spec(&window, args.a, det, h, forecast)?.with_origin(o);
            let pb = forecast_spec(&window, args.b, det, h, forecast)?.with_origin(o);
            let pc = combine_equal(&[pa.clone(), pb.clone()])?;
            let actual = panel.values().rows(o + 1, h).into_owned();
            Ok(CombinedOrigin {
                a: OriginLoss::from_errors(o, &pa.errors(&actual)),
                b: OriginLoss::from_errors(o, &pb.errors(&actual)),
                c: OriginLoss::from_errors(o, &pc.errors(&actual)),
            })
        })
        .collect();

    let mut ok = Vec::new();
    let mut first_failure = None;
    for r in outcomes {
        match r {
            Ok(x) => ok.push(x),
            Err(e) => {
                first_failure.get_or_insert(e);
            }
        }
    }
    let n_failed = origins.len() - ok.len();
    if ok.is_empty() {
        return Err(first_failure.unwrap_or(Error::InvalidInput("no origins".into())));
    }
    let la: Vec<OriginLoss> = ok.iter().map(|x| x.a).collect();
    let lb: Vec<OriginLoss> = ok.iter().map(|x| x.b).collect();
    let lc: Vec<OriginLoss> = ok.iter().map(|x| x.c).collect();

    let mut s = String::new();
    writeln!(s, "T={t} H={h} origins={} failed={n_failed}", ok.len()).unwrap();
    if let Some(e) = &first_failure {
        writeln!(s, "first failure: error[{}]: {e}", e.kind_name()).unwrap();
    }
    let kinds = args.metric.kinds();
    write!(s, "{:<24}", "model").unwrap();
    for k in &kinds {
        write!(s, "  {:>24}", k.metric_name()).unwrap();
    }
    s.push('\n');
    let names = [format!("A ({})", args.a), format!("B ({})", args.b), "combination".to_string()];
    for (name, losses) in names.iter().zip([&la, &lb, &lc]) {
        write!(s, "{name:<24}").unwrap();
        for &k in &kinds {
            write!(s, "  {:>24}", opt_sci(mean_loss(losses, h, k))).unwrap();
        }
        s.push('\n');
    }
    for &k in &kinds {
        for (name, other) in [("A", &la), ("B", &lb)] {
            let lc_k: Vec<f64> = lc.iter().map(|l| l.get(k)).collect();
            let lo_k: Vec<f64> = other.iter().map(|l| l.get(k)).collect();
            let line = match dm_test(&lc_k, &lo_k, k, args.bandwidth) {
                Ok(r) => format!("statistic {:.6} p-value {:.6}", r.statistic, r.p_value),
                Err(Error::DegenerateVariance) => "degenerate: loss differential has zero variance".into(),
                Err(e) => format!("not available: {e}"),
            };
            writeln!(s, "DM {} combination vs {name}: {line}", k.metric_name()).unwrap();
        }
    }
    print!("{s}");

    if let Some(path) = &args.out {
        let mut csv = String::from("origin,abs_a,sq_a,abs_b,sq_b,abs_comb,sq_comb\n");
        for x in &ok {
            writeln!(
                csv,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                x.a.origin, x.a.abs, x.a.sq, x.b.abs, x.b.sq, x.c.abs, x.c.sq
            )
            .unwrap();
        }
        write_text(path, &csv)?;
    }
    Ok(if n_failed > 0 { Outcome::PartialFailure } else { Outcome::Clean })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Outcome> {
    if args.source.data.is_some() {
        return Err(Error::InvalidInput("simulate needs --sim or --preset".into()));
    }
    let spec = resolve_spec(&args.source, &args.source_opts)?.ok_or_else(|| Error::InvalidInput("no spec".into()))?;
    let diag = validate_spec(&spec)?;
    let panel = generate(&spec)?;
    write_wide_file(&panel, &args.out)?;
    if let Some(path) = &args.write_spec {
        let text = toml::to_string(&spec).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        write_text(path, &text)?;
    }
    println!(
        "simulated {} x {} panel ({} unit roots, largest stationary root modulus {}) to {}",
        panel.n_obs(),
        panel.dim(),
        diag.unit_roots,
        diag.root_moduli
            .iter()
            .find(|m| **m < 1.0 - crate::simulate::UNIT_ROOT_TOL)
            .map_or("-".into(), |m| format!("{m:.6}")),
        args.out.display()
    );
    Ok(Outcome::Clean)
}

pub fn cmd_ingest(args: &IngestArgs) -> Result<Outcome> {
    let opts = IngestOptions {
        max_gap: args.max_gap,
        expected_regions: args.regions,
    };
    let (panel, report) = load_panel(&args.data, &opts)?;
    write_wide_file(&panel, &args.out)?;
    println!(
        "{} rows read, {} missing values, {} gaps filled, {} duplicates resolved, {} rows dropped",
        report.rows_read, report.missing_values, report.gaps_filled, report.duplicates_resolved, report.rows_dropped
    );
    println!("regions: {}", report.regions_found.join(", "));
    println!("panel: {} x {} from {} to {}", panel.n_obs(), panel.dim(), report.coverage_span.0, report.coverage_span.1);
    println!("fingerprint: {}", fingerprint(&panel));
    Ok(Outcome::Clean)
}
