//! The `vollab` command line.
//!
//! Every subcommand reads one price CSV (`--input`) and writes into an output
//! directory (`--out`, default `vollab-out`). Files are named
//! `<sector>_<model>_<artifact>` where `<sector>` is the input file stem, so
//! `compare` can collect results for several sectors from one directory.
//!
//! Randomness comes from the single `--seed` (default [`DEFAULT_SEED`]):
//! LSTM initialization and training use `seed + 1`, EGARCH simulation
//! forecasts use `seed + 2`. Model fitting is deterministic.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};

use crate::backtest::{self, BacktestReport, ComparisonTable, ReportSummary};
use crate::dist::InnovationDist;
use crate::estimation::{self, BicTable, CandidateOutcome, FitOptions, FitResult};
use crate::garch::{self, Family, GarchSpec, Init};
use crate::lstm::{self, LstmConfig, Target, TrainedLstm};
use crate::market_data::{self, Horizon, ReturnSeries};

pub const DEFAULT_SEED: u64 = 42;
const LSTM_STAGE: u64 = 1;
const FORECAST_STAGE: u64 = 2;
const FORECAST_PATHS: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "vollab", version, about = "GARCH-family and LSTM volatility laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Garch,
    Gjr,
    Egarch,
    Lstm,
}

impl ModelArg {
    fn family(self) -> Option<Family> {
        match self {
            Self::Garch => Some(Family::Garch),
            Self::Gjr => Some(Family::Gjr),
            Self::Egarch => Some(Family::Egarch),
            Self::Lstm => None,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Self::Lstm => "lstm",
            other => other.family().expect("garch family").label(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DistArg {
    Normal,
    T,
    Skewt,
}

impl DistArg {
    fn template(self) -> InnovationDist {
        match self {
            Self::Normal => InnovationDist::Normal,
            Self::T => InnovationDist::StudentT { nu: 8.0 },
            Self::Skewt => InnovationDist::SkewT { nu: 8.0, lambda: 0.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TargetArg {
    Return,
    RealizedVol,
}

#[derive(Debug, Clone, clap::Args)]
struct Data {
    /// Price CSV with a Date column.
    #[arg(long)]
    input: PathBuf,
    /// Price column to use.
    #[arg(long, default_value = "Close")]
    column: String,
    /// Last training date (YYYY-MM-DD); later dates form the test set.
    #[arg(long, value_parser = parse_date_arg)]
    split: Option<NaiveDate>,
    /// Output directory.
    #[arg(long, default_value = "vollab-out")]
    out: PathBuf,
}

#[derive(Debug, Clone, clap::Args)]
struct LstmArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// What the LSTM predicts one day ahead.
    #[arg(long, value_enum, default_value = "return")]
    target: TargetArg,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a price file and print return and volatility statistics.
    Ingest {
        #[command(flatten)]
        data: Data,
        /// Rolling realized-volatility window in days.
        #[arg(long, default_value_t = 10)]
        window: usize,
    },
    /// Fit one GARCH-family model on the training period.
    Fit {
        #[command(flatten)]
        data: Data,
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long, value_enum, default_value = "skewt")]
        dist: DistArg,
    },
    /// BIC over the (p, q) grid {1, 2} x {1, 2}.
    Select {
        #[command(flatten)]
        data: Data,
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long, value_enum, default_value = "skewt")]
        dist: DistArg,
    },
    /// Variance forecasts after the last observation.
    Forecast {
        #[command(flatten)]
        data: Data,
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long, value_enum, default_value = "skewt")]
        dist: DistArg,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Train the stacked LSTM and write the model and its loss curve.
    TrainLstm {
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        lstm: LstmArgs,
        /// Realized-volatility window used by the realized-vol target.
        #[arg(long, default_value_t = 10)]
        window: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Sliding-window backtest over the test period.
    Backtest {
        #[command(flatten)]
        data: Data,
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long, value_enum, default_value = "skewt")]
        dist: DistArg,
        /// Evaluation window in days.
        #[arg(long, default_value_t = 10)]
        window: usize,
        #[command(flatten)]
        lstm: LstmArgs,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Rank backtest results and tabulate BIC for every sector in --out.
    Compare {
        #[arg(long, default_value = "vollab-out")]
        out: PathBuf,
    },
}

fn parse_date_arg(s: &str) -> Result<NaiveDate, String> {
    market_data::parse_date(s).ok_or_else(|| format!("invalid date '{s}' (expected YYYY-MM-DD)"))
}

type CliResult<T> = Result<T, String>;

fn err<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> String + '_ {
    move |e| format!("{context}: {e}")
}

/// Runs the command line `argv` (program name first) and returns the exit
/// status. Errors are reported as one line on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

/// [`run`] with explicit output and error streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 2;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match execute(cli.command) {
        Ok(text) => {
            let _ = write!(out, "{text}");
            0
        }
        Err(msg) => {
            let _ = writeln!(err, "vollab: error: {}", msg.replace('\n', " "));
            1
        }
    }
}

fn execute(command: Command) -> CliResult<String> {
    match command {
        Command::Ingest { data, window } => ingest(&data, window),
        Command::Fit { data, model, dist } => {
            let family = garch_family(model, "fit")?;
            let (_, train, _) = load(&data)?;
            let fit = fit_and_store(&data, &train, family, dist, false)?;
            Ok(describe_fit(&fit, &fit_path(&data, family)))
        }
        Command::Select { data, model, dist } => select(&data, model, dist),
        Command::Forecast {
            data,
            model,
            dist,
            horizon,
            seed,
        } => forecast(&data, model, dist, horizon, seed),
        Command::TrainLstm {
            data,
            lstm,
            window,
            seed,
        } => {
            let (returns, train, _) = load(&data)?;
            let model = train_and_store(&data, &returns, &train, &lstm, window, seed, false)?;
            let last = model.loss_history.last();
            let mut s = format!(
                "trained LSTM {:?} window {} target {} for {} epochs\n",
                model.config.layer_sizes,
                model.config.window_len,
                model.config.target.label(),
                model.loss_history.len()
            );
            if let Some(l) = last {
                let _ = writeln!(s, "final train_loss {:.6e}", l.train_loss);
                if let Some(v) = l.val_loss {
                    let _ = writeln!(s, "final val_loss {v:.6e}");
                }
            }
            let _ = writeln!(s, "wrote {}", model_path(&data).display());
            let _ = writeln!(s, "wrote {}", artifact(&data, "lstm", "loss.csv").display());
            Ok(s)
        }
        Command::Backtest {
            data,
            model,
            dist,
            window,
            lstm,
            seed,
        } => run_backtest(&data, model, dist, window, &lstm, seed),
        Command::Compare { out } => compare(&out),
    }
}

fn garch_family(model: ModelArg, command: &str) -> CliResult<Family> {
    model
        .family()
        .ok_or_else(|| format!("{command} supports --model garch|gjr|egarch, not lstm"))
}

fn sector(data: &Data) -> String {
    data.input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into())
}

fn artifact(data: &Data, model: &str, name: &str) -> PathBuf {
    data.out.join(format!("{}_{}_{}", sector(data), model, name))
}

fn fit_path(data: &Data, family: Family) -> PathBuf {
    artifact(data, family.label(), "fit.txt")
}

fn model_path(data: &Data) -> PathBuf {
    artifact(data, "lstm", "model.bin")
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(err(&format!("cannot create {}", dir.display())))?;
    }
    fs::write(path, contents).map_err(err(&format!("cannot write {}", path.display())))
}

/// Full return series plus its training and test parts.
fn load(data: &Data) -> CliResult<(ReturnSeries, ReturnSeries, Option<ReturnSeries>)> {
    let prices = market_data::load_csv(&data.input, &data.column).map_err(|e| e.to_string())?;
    let returns = market_data::compute_returns(&prices).map_err(|e| e.to_string())?;
    match data.split {
        Some(boundary) => {
            let (train, test) = market_data::train_test_split(&returns, boundary).map_err(|e| e.to_string())?;
            Ok((returns, train, Some(test)))
        }
        None => Ok((returns.clone(), returns, None)),
    }
}

fn ingest(data: &Data, window: usize) -> CliResult<String> {
    let prices = market_data::load_csv(&data.input, &data.column).map_err(|e| e.to_string())?;
    let returns = market_data::compute_returns(&prices).map_err(|e| e.to_string())?;
    let mut s = String::new();
    let _ = writeln!(s, "sector {}", sector(data));
    let _ = writeln!(
        s,
        "rows {} ({} dropped), {} to {}",
        prices.len(),
        prices.dropped_rows,
        prices.dates()[0],
        prices.dates()[prices.len() - 1]
    );
    let mut parts = vec![("all", returns.clone())];
    if let Some(boundary) = data.split {
        let (train, test) = market_data::train_test_split(&returns, boundary).map_err(|e| e.to_string())?;
        parts.push(("train", train));
        parts.push(("test", test));
    }
    let _ = writeln!(s, "part,returns,mean,daily_vol,monthly_vol,annual_vol");
    for (name, r) in &parts {
        let v = r.values();
        let daily = if v.len() > 1 {
            market_data::sample_std(v)
        } else {
            f64::NAN
        };
        let monthly = market_data::annualize(daily, Horizon::Monthly).unwrap_or(f64::NAN);
        let annual = market_data::annualize(daily, Horizon::Annual).unwrap_or(f64::NAN);
        let _ = writeln!(
            s,
            "{name},{},{:.6},{daily:.6},{monthly:.6},{annual:.6}",
            v.len(),
            market_data::mean(v)
        );
    }
    let mut csv = String::from("date,return,realized_vol\n");
    let vol = (window >= 2 && window <= returns.len())
        .then(|| market_data::realized_volatility(&returns, window))
        .transpose()
        .map_err(|e| e.to_string())?;
    for (i, (d, r)) in returns.dates().iter().zip(returns.values()).enumerate() {
        let rv = vol
            .as_ref()
            .and_then(|v| i.checked_sub(window - 1).map(|j| v.values[j].to_string()))
            .unwrap_or_default();
        let _ = writeln!(csv, "{d},{r},{rv}");
    }
    let path = data.out.join(format!("{}_returns.csv", sector(data)));
    write(&path, csv)?;
    let _ = writeln!(s, "wrote {}", path.display());
    Ok(s)
}

/// Reuses a stored fit when it matches the request and the training data,
/// otherwise fits and stores.
fn fit_and_store(
    data: &Data,
    train: &ReturnSeries,
    family: Family,
    dist: DistArg,
    reuse: bool,
) -> CliResult<FitResult> {
    let path = fit_path(data, family);
    if reuse {
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(fit) = estimation::parse_fit_document(&text) {
                if fit.spec.family == family
                    && fit.spec.dist.label() == dist.template().label()
                    && fit.n_obs == train.len()
                {
                    return Ok(fit);
                }
            }
        }
    }
    let spec = GarchSpec::new(family, dist.template());
    let fit = estimation::fit(&spec, train.values(), &FitOptions::default()).map_err(|e| e.to_string())?;
    write(&path, estimation::write_fit_document(&fit))?;
    Ok(fit)
}

fn converged(fit: FitResult) -> CliResult<FitResult> {
    if fit.converged {
        Ok(fit)
    } else {
        Err(format!(
            "{} fit with {} innovations did not converge after {} iterations; refit with another --dist or a longer sample",
            fit.spec.family.display_name(),
            fit.spec.dist.label(),
            fit.iterations
        ))
    }
}

fn describe_fit(fit: &FitResult, path: &Path) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} with {} innovations on {} returns",
        fit.spec.family.display_name(),
        fit.spec.dist.label(),
        fit.n_obs
    );
    let _ = writeln!(
        s,
        "{:<8} {:>14} {:>12} {:>10}",
        "param", "estimate", "std.err", "p-value"
    );
    for e in &fit.estimates {
        let se = e.stderr.map_or("NA".to_string(), |v| format!("{v:.6}"));
        let p = e.p_value.map_or("NA".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(s, "{:<8} {:>14.6} {:>12} {:>10}", e.name, e.value, se, p);
    }
    let _ = writeln!(s, "loglik {:.4}", fit.loglik);
    let _ = writeln!(s, "bic {:.4} (k={}, n={})", fit.bic, fit.k, fit.n_obs);
    let _ = writeln!(s, "converged {} after {} iterations", fit.converged, fit.iterations);
    if let Some(note) = &fit.inference_note {
        let _ = writeln!(s, "note: {note}");
    }
    let _ = writeln!(s, "wrote {}", path.display());
    s
}

fn select(data: &Data, model: ModelArg, dist: DistArg) -> CliResult<String> {
    let family = garch_family(model, "select")?;
    let (_, train, _) = load(data)?;
    let spec = GarchSpec::new(family, dist.template());
    let grid = [1, 2];
    let sel = estimation::select_order(train.values(), &spec, &grid, &grid, &FitOptions::default())
        .map_err(|e| e.to_string())?;
    let mut csv = String::from("p,q,status,loglik,bic,best\n");
    for c in &sel.table {
        let best = c.p == sel.p && c.q == sel.q;
        let row = match &c.outcome {
            CandidateOutcome::Fitted { loglik, bic } => format!("fitted,{loglik:.4},{bic:.4}"),
            CandidateOutcome::Unsupported => "unsupported,,".into(),
            CandidateOutcome::Failed(m) => format!("failed: {},,", m.replace(',', ";")),
        };
        let _ = writeln!(csv, "{},{},{row},{best}", c.p, c.q);
    }
    let path = artifact(data, family.label(), "select.csv");
    write(&path, &csv)?;
    Ok(format!(
        "{csv}selected p={} q={} for {}\nwrote {}\n",
        sel.p,
        sel.q,
        family.display_name(),
        path.display()
    ))
}

fn forecast(data: &Data, model: ModelArg, dist: DistArg, horizon: usize, seed: u64) -> CliResult<String> {
    let family = garch_family(model, "forecast")?;
    let (returns, train, _) = load(data)?;
    let fit = converged(fit_and_store(data, &train, family, dist, true)?)?;
    let path = garch::filter_variance_from(&fit.spec, &fit.params, returns.values(), Init::Fixed(fit.backcast))
        .map_err(|e| e.to_string())?;
    let f = garch::forecast(
        &fit.spec,
        &fit.params,
        &path,
        horizon,
        FORECAST_PATHS,
        seed.wrapping_add(FORECAST_STAGE),
    )
    .map_err(|e| e.to_string())?;
    let mut csv = String::from("step,sigma2,sigma,annualized_sigma\n");
    for (h, (v, s)) in f.sigma2.iter().zip(&f.sigma).enumerate() {
        let annual = market_data::annualize(*s, Horizon::Annual).map_err(|e| e.to_string())?;
        let _ = writeln!(csv, "{},{v},{s},{annual}", h + 1);
    }
    let out = artifact(data, family.label(), "forecast.csv");
    write(&out, &csv)?;
    Ok(format!(
        "{} forecast from {} ({:?})\n{csv}wrote {}\n",
        family.display_name(),
        returns.dates()[returns.len() - 1],
        f.method,
        out.display()
    ))
}

fn lstm_config(args: &LstmArgs, window: usize, seed: u64) -> LstmConfig {
    let base = LstmConfig::default();
    LstmConfig {
        epochs: args.epochs.unwrap_or(base.epochs),
        batch_size: args.batch_size.unwrap_or(base.batch_size),
        learning_rate: args.lr.unwrap_or(base.learning_rate),
        target: match args.target {
            TargetArg::Return => Target::Return,
            TargetArg::RealizedVol => Target::RealizedVol { window },
        },
        seed: seed.wrapping_add(LSTM_STAGE),
        ..base
    }
}

/// Reuses a stored model trained with the same configuration, otherwise
/// trains and stores one.
fn train_and_store(
    data: &Data,
    returns: &ReturnSeries,
    train: &ReturnSeries,
    args: &LstmArgs,
    window: usize,
    seed: u64,
    reuse: bool,
) -> CliResult<TrainedLstm> {
    let config = lstm_config(args, window, seed);
    let path = model_path(data);
    if reuse {
        if let Ok(m) = TrainedLstm::load(&path) {
            if m.config == config {
                return Ok(m);
            }
        }
    }
    let boundary = train.dates()[train.len() - 1];
    let (train_set, valid) = if boundary < returns.dates()[returns.len() - 1] {
        let (t, v) =
            lstm::prepare_datasets(returns, boundary, config.window_len, config.target).map_err(|e| e.to_string())?;
        (t, Some(v))
    } else {
        let (dates, values) = lstm::target_series(returns, config.target).map_err(|e| e.to_string())?;
        let scaler = lstm::MinMaxScaler::fit(&values).map_err(|e| e.to_string())?;
        let t = lstm::windows_from(&dates, &values, config.window_len, scaler).map_err(|e| e.to_string())?;
        (t, None)
    };
    let model = TrainedLstm::init(&config, config.seed)
        .and_then(|m| m.train(&train_set, valid.as_ref()))
        .map_err(|e| e.to_string())?;
    write(&path, model.to_bytes())?;
    write(&artifact(data, "lstm", "loss.csv"), model.loss_csv())?;
    Ok(model)
}

fn run_backtest(
    data: &Data,
    model: ModelArg,
    dist: DistArg,
    window: usize,
    lstm_args: &LstmArgs,
    seed: u64,
) -> CliResult<String> {
    let (returns, train, test) = load(data)?;
    let eval = test.as_ref().unwrap_or(&returns);
    let span = (eval.dates()[0], eval.dates()[eval.len() - 1]);
    let train_span = (train.dates()[0], train.dates()[train.len() - 1]);
    let label = model.label();
    let mut s = String::new();
    let (report, train_report) = match model.family() {
        Some(family) => {
            let fit = converged(fit_and_store(data, &train, family, dist, true)?)?;
            let path = garch::filter_variance_from(&fit.spec, &fit.params, returns.values(), Init::Fixed(fit.backcast))
                .map_err(|e| e.to_string())?;
            let mut csv = String::from("date,return,conditional_vol\n");
            for ((d, r), v) in returns.dates().iter().zip(returns.values()).zip(&path.sigma2) {
                let _ = writeln!(csv, "{d},{r},{}", v.sqrt());
            }
            let cv_path = artifact(data, label, "condvol.csv");
            write(&cv_path, csv)?;
            let _ = writeln!(s, "wrote {}", cv_path.display());
            let rep = backtest::backtest_garch(&fit, &returns, span, window).map_err(|e| e.to_string())?;
            let in_sample = backtest::backtest_garch(&fit, &returns, train_span, window).ok();
            (rep, in_sample)
        }
        None => {
            let m = train_and_store(data, &returns, &train, lstm_args, window, seed, true)?;
            let rep = backtest::backtest_lstm(&m, &returns, span).map_err(|e| e.to_string())?;
            let in_sample = backtest::backtest_lstm(&m, &returns, train_span).ok();
            (rep, in_sample)
        }
    };
    write_report(data, label, "backtest.csv", &report, &mut s)?;
    if let Some(r) = &train_report {
        write_report(data, label, "backtest_train.csv", r, &mut s)?;
    }
    let summary_path = artifact(data, label, "summary.json");
    write(&summary_path, report.summary_json())?;
    let _ = writeln!(s, "wrote {}", summary_path.display());
    Ok(format!(
        "{} backtest {} to {}: {} windows of {} days, rmse {:.4}, mae {:.4} ({})\n{s}",
        report.model_id.display_name(),
        report.span.0,
        report.span.1,
        report.len(),
        report.window_len,
        report.rmse,
        report.mae,
        report.units,
    ))
}

fn write_report(data: &Data, label: &str, name: &str, report: &BacktestReport, log: &mut String) -> CliResult<()> {
    let path = artifact(data, label, name);
    write(&path, report.to_csv())?;
    let _ = writeln!(log, "wrote {}", path.display());
    Ok(())
}

/// Splits `<sector>_<model>_<suffix>` file names.
fn split_name<'a>(name: &'a str, suffix: &str) -> Option<(&'a str, &'a str)> {
    let stem = name.strip_suffix(suffix)?.strip_suffix('_')?;
    let (sector, model) = stem.rsplit_once('_')?;
    (!sector.is_empty()).then_some((sector, model))
}

fn compare(out: &Path) -> CliResult<String> {
    let entries = fs::read_dir(out).map_err(err(&format!("cannot read {}", out.display())))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let mut summaries: std::collections::BTreeMap<String, Vec<ReportSummary>> = Default::default();
    let mut bic = BicTable::default();
    let mut have_bic = false;
    for name in &names {
        let path = out.join(name);
        if let Some((sector, _)) = split_name(name, "summary.json") {
            let text = fs::read_to_string(&path).map_err(err(&format!("cannot read {}", path.display())))?;
            let summary = backtest::parse_summary(&text).map_err(err(&path.display().to_string()))?;
            summaries.entry(sector.to_string()).or_default().push(summary);
        } else if let Some((sector, _)) = split_name(name, "fit.txt") {
            let text = fs::read_to_string(&path).map_err(err(&format!("cannot read {}", path.display())))?;
            let fit = estimation::parse_fit_document(&text).map_err(err(&path.display().to_string()))?;
            bic.insert(sector, fit.spec.family, fit.bic);
            have_bic = true;
        }
    }
    if summaries.is_empty() && !have_bic {
        return Err(format!("no backtest summaries or fit documents in {}", out.display()));
    }
    let mut s = String::new();
    if !summaries.is_empty() {
        let mut table = ComparisonTable::default();
        for (sector, reports) in &summaries {
            table.extend(backtest::compare(reports, sector).map_err(|e| e.to_string())?);
        }
        let csv = table.to_csv();
        let path = out.join("comparison.csv");
        write(&path, &csv)?;
        s.push_str(&csv);
        if let Some(note) = table.cross_unit_note() {
            let _ = writeln!(s, "note: {note}");
        }
        let _ = writeln!(s, "wrote {}", path.display());
    }
    if have_bic {
        let csv = bic.to_csv();
        let path = out.join("bic_table.csv");
        write(&path, &csv)?;
        s.push_str(&csv);
        let _ = writeln!(s, "wrote {}", path.display());
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_artifact_names() {
        assert_eq!(split_name("banking_gjr_fit.txt", "fit.txt"), Some(("banking", "gjr")));
        assert_eq!(
            split_name("nifty_it_lstm_summary.json", "summary.json"),
            Some(("nifty_it", "lstm"))
        );
        assert_eq!(split_name("gjr_fit.txt", "fit.txt"), None);
        assert_eq!(split_name("comparison.csv", "fit.txt"), None);
    }

    #[test]
    fn usage_errors_are_nonzero() {
        let status = |argv: &[&str]| {
            let (mut out, mut err) = (Vec::new(), Vec::new());
            let code = run_with(argv, &mut out, &mut err);
            (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
        };
        let (code, _, err) = status(&["vollab", "frobnicate"]);
        assert_eq!(code, 2);
        assert!(err.contains("frobnicate"));
        let (code, _, err) = status(&["vollab", "fit", "--input", "x.csv", "--model", "garch", "--bogus"]);
        assert_eq!(code, 2);
        assert!(err.contains("--bogus"));
        let (code, out, _) = status(&["vollab", "--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("train-lstm"));
        let (code, _, err) = status(&["vollab", "fit", "--input", "/nonexistent/x.csv", "--model", "garch"]);
        assert_eq!(code, 1);
        assert!(err.starts_with("vollab: error:") && err.lines().count() == 1);
    }

    #[test]
    fn lstm_is_refused_where_unsupported() {
        assert_eq!(
            garch_family(ModelArg::Lstm, "fit").unwrap_err(),
            "fit supports --model garch|gjr|egarch, not lstm"
        );
    }

    #[test]
    fn stage_seeds_differ() {
        let args = LstmArgs {
            epochs: Some(3),
            batch_size: None,
            lr: None,
            target: TargetArg::RealizedVol,
        };
        let c = lstm_config(&args, 10, DEFAULT_SEED);
        assert_eq!(c.seed, DEFAULT_SEED + LSTM_STAGE);
        assert_eq!(c.epochs, 3);
        assert_eq!(c.target, Target::RealizedVol { window: 10 });
        assert_eq!(c.batch_size, 64);
    }
}
