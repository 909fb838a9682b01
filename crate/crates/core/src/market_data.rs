//! Price ingestion and the return/volatility arithmetic everything else
//! builds on.
//!
//! Returns are simple percent changes of closing prices, so every variance
//! downstream is in percent².

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use thiserror::Error;

/// Trading days per month used by [`annualize`].
pub const TRADING_DAYS_PER_MONTH: f64 = 21.0;
/// Trading days per year used by [`annualize`].
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Optional numeric columns kept when present in the input file.
const OPTIONAL_COLUMNS: [&str; 6] = ["Open", "High", "Low", "Close", "Adj Close", "Volume"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketDataError {
    #[error("cannot read {path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("malformed CSV at row {row}: {reason}")]
    Csv { row: usize, reason: String },
    #[error("column '{column}' not found in header")]
    MissingColumn { column: String },
    #[error("row {row}: unparseable date '{value}' (expected YYYY-MM-DD or DD-MM-YYYY)")]
    BadDate { row: usize, value: String },
    #[error("row {row}: column '{column}' has non-numeric value '{value}'")]
    BadValue { row: usize, column: String, value: String },
    #[error("duplicate date {date}")]
    DuplicateDate { date: NaiveDate },
    #[error("need at least 2 usable rows, found {found}")]
    TooFewRows { found: usize },
    #[error("non-positive close {value} on {date}")]
    NonPositiveClose { date: NaiveDate, value: f64 },
    #[error("dates and values differ in length ({dates} vs {values})")]
    LengthMismatch { dates: usize, values: usize },
    #[error("dates are not strictly increasing at position {index}")]
    UnorderedDates { index: usize },
    #[error("volatility window must be at least 2, got {window}")]
    WindowTooShort { window: usize },
    #[error("volatility window {window} exceeds series length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("volatility must be non-negative, got {value}")]
    NegativeVolatility { value: f64 },
    #[error("split boundary {boundary} must satisfy {first} <= boundary < {last}")]
    BoundaryOutOfRange {
        boundary: NaiveDate,
        first: NaiveDate,
        last: NaiveDate,
    },
}

pub type Result<T> = std::result::Result<T, MarketDataError>;

/// Closing prices (plus any OHLCV columns found) for one instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub symbol: String,
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
    /// Other recognised numeric columns, aligned with `dates`; cells that
    /// were blank or non-numeric are `None`.
    pub extra: BTreeMap<String, Vec<Option<f64>>>,
    /// Rows discarded because the requested column was missing.
    pub dropped_rows: usize,
}

impl PriceSeries {
    pub fn new(symbol: impl Into<String>, dates: Vec<NaiveDate>, closes: Vec<f64>) -> Result<Self> {
        check_dates(&dates, closes.len())?;
        if dates.len() < 2 {
            return Err(MarketDataError::TooFewRows { found: dates.len() });
        }
        if let Some(i) = closes.iter().position(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(MarketDataError::NonPositiveClose {
                date: dates[i],
                value: closes[i],
            });
        }
        Ok(Self {
            symbol: symbol.into(),
            dates,
            closes,
            extra: BTreeMap::new(),
            dropped_rows: 0,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }
}

/// Dated percent returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        check_dates(&dates, values.len())?;
        Ok(Self { dates, values })
    }

    /// Attaches consecutive calendar days starting at `start`. Used for
    /// synthetic series that have no natural calendar.
    pub fn from_values(start: NaiveDate, values: Vec<f64>) -> Self {
        let dates = start.iter_days().take(values.len()).collect();
        Self { dates, values }
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index range `[lo, hi)` of dates falling inside `[start, end]`.
    pub fn index_range(&self, start: NaiveDate, end: NaiveDate) -> std::ops::Range<usize> {
        let lo = self.dates.partition_point(|d| *d < start);
        let hi = self.dates.partition_point(|d| *d <= end);
        lo..hi.max(lo)
    }

    /// Sub-series over an index range.
    pub fn slice(&self, range: std::ops::Range<usize>) -> ReturnSeries {
        ReturnSeries {
            dates: self.dates[range.clone()].to_vec(),
            values: self.values[range].to_vec(),
        }
    }

    /// Appends `other`, which must start strictly after this series ends.
    pub fn concat(&self, other: &ReturnSeries) -> Result<ReturnSeries> {
        let mut dates = self.dates.clone();
        dates.extend_from_slice(&other.dates);
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        ReturnSeries::new(dates, values)
    }
}

/// Rolling realized volatility; `values[i]` covers the `window_len`
/// returns ending at `dates[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolSeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    pub window_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Monthly,
    Annual,
}

fn check_dates(dates: &[NaiveDate], n_values: usize) -> Result<()> {
    if dates.len() != n_values {
        return Err(MarketDataError::LengthMismatch {
            dates: dates.len(),
            values: n_values,
        });
    }
    if let Some(i) = dates.windows(2).position(|w| w[0] >= w[1]) {
        return Err(MarketDataError::UnorderedDates { index: i + 1 });
    }
    Ok(())
}

/// Parses `YYYY-MM-DD` or `DD-MM-YYYY`; a trailing time component after a
/// space or `T` is ignored.
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let s = raw.trim();
    let s = s.split([' ', 'T']).next().unwrap_or(s);
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%d-%m-%Y"))
        .ok()
}

fn parse_cell(raw: &str) -> std::result::Result<Option<f64>, ()> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("null") || s.eq_ignore_ascii_case("nan") || s == "NA" {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| ())
}

fn find_column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .or_else(|| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name)))
}

/// Loads a price file, keeping `column` as the close series.
///
/// Rows whose `column` cell is blank (or `null`/`NaN`) are dropped and
/// counted in [`PriceSeries::dropped_rows`]. Rows are sorted by date;
/// a repeated date is an error. Row numbers in errors are 1-based data rows.
pub fn load_csv(path: impl AsRef<Path>, column: &str) -> Result<PriceSeries> {
    let path = path.as_ref();
    let io_err = |e: &dyn std::fmt::Display| MarketDataError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| io_err(&e))?;
    let headers = reader.headers().map_err(|e| io_err(&e))?.clone();
    let date_idx =
        find_column(&headers, "Date").ok_or_else(|| MarketDataError::MissingColumn { column: "Date".into() })?;
    let value_idx =
        find_column(&headers, column).ok_or_else(|| MarketDataError::MissingColumn { column: column.into() })?;
    let optional: Vec<(String, usize)> = OPTIONAL_COLUMNS
        .iter()
        .filter_map(|name| find_column(&headers, name).map(|i| (name.to_string(), i)))
        .filter(|(_, i)| *i != value_idx)
        .collect();

    let mut rows: Vec<(NaiveDate, f64, Vec<Option<f64>>)> = Vec::new();
    let mut dropped = 0;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| MarketDataError::Csv {
            row,
            reason: e.to_string(),
        })?;
        let raw_date = record.get(date_idx).unwrap_or("");
        let date = parse_date(raw_date).ok_or_else(|| MarketDataError::BadDate {
            row,
            value: raw_date.to_string(),
        })?;
        let raw_value = record.get(value_idx).unwrap_or("");
        let value = parse_cell(raw_value).map_err(|_| MarketDataError::BadValue {
            row,
            column: column.to_string(),
            value: raw_value.to_string(),
        })?;
        let Some(value) = value else {
            dropped += 1;
            continue;
        };
        let others = optional
            .iter()
            .map(|(_, j)| record.get(*j).and_then(|s| parse_cell(s).ok().flatten()))
            .collect();
        rows.push((date, value, others));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(MarketDataError::DuplicateDate { date: w[0].0 });
    }
    if rows.len() < 2 {
        return Err(MarketDataError::TooFewRows { found: rows.len() });
    }

    let symbol = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let dates = rows.iter().map(|r| r.0).collect();
    let closes = rows.iter().map(|r| r.1).collect();
    let mut series = PriceSeries::new(symbol, dates, closes)?;
    for (k, (name, _)) in optional.iter().enumerate() {
        series.extra.insert(name.clone(), rows.iter().map(|r| r.2[k]).collect());
    }
    series.dropped_rows = dropped;
    Ok(series)
}

/// Percent change of consecutive closes, dated at the later day.
pub fn compute_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    let closes = prices.closes();
    if closes.len() < 2 {
        return Err(MarketDataError::TooFewRows { found: closes.len() });
    }
    if let Some(i) = closes.iter().position(|&c| !(c > 0.0)) {
        return Err(MarketDataError::NonPositiveClose {
            date: prices.dates()[i],
            value: closes[i],
        });
    }
    let values = closes.windows(2).map(|w| 100.0 * (w[1] - w[0]) / w[0]).collect();
    ReturnSeries::new(prices.dates()[1..].to_vec(), values)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with divisor `n - 1`.
///
/// The mean is accumulated relative to the first element, so a constant
/// input yields exactly zero.
pub fn sample_std(xs: &[f64]) -> f64 {
    let origin = xs[0];
    let m = origin + xs.iter().map(|x| x - origin).sum::<f64>() / xs.len() as f64;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

/// Trailing sample standard deviation over `window_len` returns.
pub fn realized_volatility(returns: &ReturnSeries, window_len: usize) -> Result<VolSeries> {
    if window_len < 2 {
        return Err(MarketDataError::WindowTooShort { window: window_len });
    }
    if window_len > returns.len() {
        return Err(MarketDataError::WindowTooLong {
            window: window_len,
            len: returns.len(),
        });
    }
    let values = returns.values().windows(window_len).map(sample_std).collect();
    Ok(VolSeries {
        dates: returns.dates()[window_len - 1..].to_vec(),
        values,
        window_len,
    })
}

/// Scales a daily volatility by √21 (monthly) or √252 (annual).
pub fn annualize(daily_vol: f64, horizon: Horizon) -> Result<f64> {
    if !(daily_vol >= 0.0) {
        return Err(MarketDataError::NegativeVolatility { value: daily_vol });
    }
    let days = match horizon {
        Horizon::Monthly => TRADING_DAYS_PER_MONTH,
        Horizon::Annual => TRADING_DAYS_PER_YEAR,
    };
    Ok(daily_vol * days.sqrt())
}

/// Splits into dates `<= boundary` and dates `> boundary`. Both parts must
/// be nonempty.
pub fn train_test_split(series: &ReturnSeries, boundary: NaiveDate) -> Result<(ReturnSeries, ReturnSeries)> {
    let out_of_range = || MarketDataError::BoundaryOutOfRange {
        boundary,
        first: series.dates.first().copied().unwrap_or_default(),
        last: series.dates.last().copied().unwrap_or_default(),
    };
    let (Some(&first), Some(&last)) = (series.dates.first(), series.dates.last()) else {
        return Err(out_of_range());
    };
    if boundary < first || boundary >= last {
        return Err(out_of_range());
    }
    let cut = series.dates.partition_point(|d| *d <= boundary);
    Ok((series.slice(0..cut), series.slice(cut..series.len())))
}
