//! Sliding-window evaluation of volatility predictions and cross-model
//! comparison.
//!
//! For a GARCH-family fit each window of `window_len` consecutive returns
//! ending at day `t` is scored as
//!
//! ```text
//! realized  = sample std of the returns in the window
//! predicted = √(mean σ²_s over the window)
//! ```
//!
//! where `σ²_s` is the one-step-ahead conditional variance obtained by
//! filtering the whole history with the fitted parameters held fixed.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::FitResult;
use crate::garch::{self, Family, GarchError, Init};
use crate::lstm::{self, LstmError, TrainedLstm};
use crate::market_data::{sample_std, ReturnSeries};

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("prediction and actual vectors differ in length ({predicted} vs {actual})")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("cannot score an empty vector")]
    Empty,
    #[error("evaluation span holds {span} observations, fewer than the window of {window}")]
    SpanTooShort { span: usize, window: usize },
    #[error("evaluation window must be at least 2 days, got {0}")]
    WindowTooShort(usize),
    #[error("fit did not converge; refusing to backtest unconverged parameters")]
    NotConverged,
    #[error("no reports to compare")]
    NoReports,
    #[error("unknown model id '{0}'")]
    UnknownModel(String),
    #[error("bad report summary: {0}")]
    Summary(String),
    #[error(transparent)]
    Garch(#[from] GarchError),
    #[error(transparent)]
    Lstm(#[from] LstmError),
}

pub type Result<T> = std::result::Result<T, BacktestError>;

fn check_pair(pred: &[f64], actual: &[f64]) -> Result<()> {
    if pred.len() != actual.len() {
        return Err(BacktestError::LengthMismatch {
            predicted: pred.len(),
            actual: actual.len(),
        });
    }
    if pred.is_empty() {
        return Err(BacktestError::Empty);
    }
    Ok(())
}

/// `√(mean((p − a)²))`.
pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_pair(pred, actual)?;
    let ss: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}

/// `mean(|p − a|)`.
pub fn mae(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_pair(pred, actual)?;
    let s: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum();
    Ok(s / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// Percent returns or percent volatilities.
    Percent,
    /// Min-max scaled values of an LSTM target.
    Scaled,
}

impl Units {
    pub fn label(self) -> &'static str {
        match self {
            Self::Percent => "percent",
            Self::Scaled => "scaled",
        }
    }
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    Garch,
    Gjr,
    Egarch,
    Lstm,
}

impl ModelId {
    pub fn label(self) -> &'static str {
        match self {
            Self::Garch => "garch",
            Self::Gjr => "gjr",
            Self::Egarch => "egarch",
            Self::Lstm => "lstm",
        }
    }

    /// Name used in comparison tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Self::Garch => Family::Garch.display_name(),
            Self::Gjr => Family::Gjr.display_name(),
            Self::Egarch => Family::Egarch.display_name(),
            Self::Lstm => "LSTM",
        }
    }
}

impl From<Family> for ModelId {
    fn from(f: Family) -> Self {
        match f {
            Family::Garch => Self::Garch,
            Family::Gjr => Self::Gjr,
            Family::Egarch => Self::Egarch,
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelId {
    type Err = BacktestError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(Self::Lstm),
            other => other
                .parse::<Family>()
                .map(Self::from)
                .map_err(|_| BacktestError::UnknownModel(s.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub model_id: ModelId,
    pub window_len: usize,
    /// Last day of each evaluation window, strictly increasing.
    pub dates: Vec<NaiveDate>,
    pub predicted: Vec<f64>,
    pub realized: Vec<f64>,
    pub rmse: f64,
    pub mae: f64,
    pub units: Units,
    /// First and last observation of the evaluation span.
    pub span: (NaiveDate, NaiveDate),
}

/// The scalar part of a report, as written next to its CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub model_id: ModelId,
    pub window_len: usize,
    pub n_windows: usize,
    pub rmse: f64,
    pub mae: f64,
    pub units: Units,
    pub span_start: NaiveDate,
    pub span_end: NaiveDate,
}

impl BacktestReport {
    fn new(
        model_id: ModelId,
        window_len: usize,
        dates: Vec<NaiveDate>,
        predicted: Vec<f64>,
        realized: Vec<f64>,
        units: Units,
        span: (NaiveDate, NaiveDate),
    ) -> Result<Self> {
        Ok(Self {
            rmse: rmse(&predicted, &realized)?,
            mae: mae(&predicted, &realized)?,
            model_id,
            window_len,
            dates,
            predicted,
            realized,
            units,
            span,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// `date,predicted,realized` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("date,predicted,realized\n");
        for ((d, p), r) in self.dates.iter().zip(&self.predicted).zip(&self.realized) {
            s.push_str(&format!("{d},{p},{r}\n"));
        }
        s
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            model_id: self.model_id,
            window_len: self.window_len,
            n_windows: self.len(),
            rmse: self.rmse,
            mae: self.mae,
            units: self.units,
            span_start: self.span.0,
            span_end: self.span.1,
        }
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary()).expect("summary serializes");
        s.push('\n');
        s
    }
}

pub fn parse_summary(text: &str) -> Result<ReportSummary> {
    serde_json::from_str(text).map_err(|e| BacktestError::Summary(e.to_string()))
}

/// Fixed-parameter sliding-window backtest of a GARCH-family fit.
///
/// The variance filter runs over all of `returns`, starting from the fit's
/// own backcast, so the first evaluation window already carries the
/// in-sample history. Windows are the `window_len`-day blocks lying fully
/// inside `span` (inclusive dates), giving `span_len − window_len + 1` rows.
pub fn backtest_garch(
    fit: &FitResult,
    returns: &ReturnSeries,
    span: (NaiveDate, NaiveDate),
    window_len: usize,
) -> Result<BacktestReport> {
    if !fit.converged {
        return Err(BacktestError::NotConverged);
    }
    if window_len < 2 {
        return Err(BacktestError::WindowTooShort(window_len));
    }
    let range = returns.index_range(span.0, span.1);
    if range.len() < window_len {
        return Err(BacktestError::SpanTooShort {
            span: range.len(),
            window: window_len,
        });
    }
    let path = garch::filter_variance_from(&fit.spec, &fit.params, returns.values(), Init::Fixed(fit.backcast))?;
    let values = returns.values();
    let n = range.len() - window_len + 1;
    let mut dates = Vec::with_capacity(n);
    let mut predicted = Vec::with_capacity(n);
    let mut realized = Vec::with_capacity(n);
    for end in range.start + window_len - 1..range.end {
        let w = end + 1 - window_len..end + 1;
        let mean_var = path.sigma2[w.clone()].iter().sum::<f64>() / window_len as f64;
        dates.push(returns.dates()[end]);
        predicted.push(mean_var.sqrt());
        realized.push(sample_std(&values[w]));
    }
    let span = (returns.dates()[range.start], returns.dates()[range.end - 1]);
    BacktestReport::new(
        fit.spec.family.into(),
        window_len,
        dates,
        predicted,
        realized,
        Units::Percent,
        span,
    )
}

/// Next-step evaluation of an LSTM over `span`.
///
/// The model's target series (returns or realized volatility) is cut to the
/// span and windowed with the model's own window and scaler; each row
/// compares one prediction with the value it targets. An evaluation window
/// therefore spans `window_len + 1` observations. Units are `scaled` unless
/// the model was trained on unscaled values.
pub fn backtest_lstm(
    model: &TrainedLstm,
    returns: &ReturnSeries,
    span: (NaiveDate, NaiveDate),
) -> Result<BacktestReport> {
    let (dates, values) = lstm::target_series(returns, model.config.target)?;
    let lo = dates.partition_point(|d| *d < span.0);
    let hi = dates.partition_point(|d| *d <= span.1).max(lo);
    let window = model.config.window_len;
    if hi - lo <= window {
        return Err(BacktestError::SpanTooShort {
            span: hi - lo,
            window: window + 1,
        });
    }
    let data = lstm::windows_from(&dates[lo..hi], &values[lo..hi], window, model.scaler)?;
    let predicted = model.predict_scaled(&data)?;
    let units = if model.scaler.is_identity() {
        Units::Percent
    } else {
        Units::Scaled
    };
    BacktestReport::new(
        ModelId::Lstm,
        window + 1,
        data.target_dates,
        predicted,
        data.targets.to_vec(),
        units,
        (dates[lo], dates[hi - 1]),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub sector: String,
    pub model_id: ModelId,
    pub rmse: f64,
    pub mae: f64,
    pub units: Units,
    /// 1-based rank among rows of the same sector and units.
    pub rank: usize,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// Marker attached to tables mixing units.
pub const CROSS_UNIT_NOTE: &str =
    "rmse values in different units are ranked separately and must not be compared across groups";

impl ComparisonTable {
    pub fn extend(&mut self, other: ComparisonTable) {
        self.rows.extend(other.rows);
    }

    /// Set when some sector holds more than one units group.
    pub fn cross_unit_note(&self) -> Option<&'static str> {
        let mut seen = std::collections::BTreeMap::<&str, Units>::new();
        for r in &self.rows {
            match seen.insert(&r.sector, r.units) {
                Some(u) if u != r.units => return Some(CROSS_UNIT_NOTE),
                _ => {}
            }
        }
        None
    }

    /// `sector,model,rmse,units,rank,best` rows; rmse to four decimals.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sector,model,rmse,units,rank,best\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:.4},{},{},{}\n",
                r.sector,
                r.model_id.display_name(),
                r.rmse,
                r.units,
                r.rank,
                r.best
            ));
        }
        s
    }
}

/// Ranks `reports` for one sector by ascending rmse, separately per units
/// group. Percent rows come before scaled rows.
pub fn compare(reports: &[ReportSummary], sector: &str) -> Result<ComparisonTable> {
    if reports.is_empty() {
        return Err(BacktestError::NoReports);
    }
    let mut sorted: Vec<&ReportSummary> = reports.iter().collect();
    sorted.sort_by(|a, b| {
        a.units
            .cmp(&b.units)
            .then(a.rmse.total_cmp(&b.rmse))
            .then(a.model_id.cmp(&b.model_id))
    });
    let mut rows = Vec::with_capacity(sorted.len());
    let mut rank = 0;
    let mut group = None;
    for r in sorted {
        if group != Some(r.units) {
            group = Some(r.units);
            rank = 0;
        }
        rank += 1;
        rows.push(ComparisonRow {
            sector: sector.to_string(),
            model_id: r.model_id,
            rmse: r.rmse,
            mae: r.mae,
            units: r.units,
            rank,
            best: rank == 1,
        });
    }
    Ok(ComparisonTable { rows })
}
