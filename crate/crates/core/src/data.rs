//! Market data: trading calendar, adjusted-close price panel, membership
//! mask, and simple returns.
//!
//! Prices live in a dense ticker × day matrix with `NaN` marking missing
//! observations; present prices are strictly positive by construction.

use std::collections::HashSet;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Trading days per year used for all annualization.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Strictly increasing list of trading days.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradingCalendar {
    days: Vec<NaiveDate>,
}

impl TradingCalendar {
    pub fn new(days: Vec<NaiveDate>) -> Result<Self> {
        if days.is_empty() {
            return Err(Error::Validation("calendar has no trading days".into()));
        }
        for w in days.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Validation(format!(
                    "calendar dates not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { days })
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn day(&self, index: usize) -> NaiveDate {
        self.days[index]
    }

    /// Index of an exact trading day.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.days.binary_search(&date).ok()
    }
}

/// Dense panel of adjusted close prices (tickers × trading days).
#[derive(Debug, Clone)]
pub struct PricePanel {
    calendar: TradingCalendar,
    tickers: Vec<String>,
    /// `NaN` = missing observation; otherwise strictly positive.
    prices: Array2<f64>,
    /// Index membership per ticker per day.
    membership: Array2<bool>,
}

impl PricePanel {
    /// Build a panel, checking shape and positivity. Membership defaults to
    /// every ticker being a member on every day.
    pub fn new(
        calendar: TradingCalendar,
        tickers: Vec<String>,
        prices: Array2<f64>,
    ) -> Result<Self> {
        if prices.nrows() != tickers.len() || prices.ncols() != calendar.len() {
            return Err(Error::Argument(format!(
                "price matrix is {}x{}, expected {}x{}",
                prices.nrows(),
                prices.ncols(),
                tickers.len(),
                calendar.len()
            )));
        }
        let mut seen = HashSet::new();
        for t in &tickers {
            if !seen.insert(t.as_str()) {
                return Err(Error::Validation(format!("duplicate ticker {t}")));
            }
        }
        for (s, ticker) in tickers.iter().enumerate() {
            for (d, &p) in prices.row(s).iter().enumerate() {
                if !p.is_nan() && p <= 0.0 {
                    return Err(Error::Validation(format!(
                        "non-positive price {} for {} on {}",
                        p,
                        ticker,
                        calendar.day(d)
                    )));
                }
            }
        }
        let membership = Array2::from_elem((tickers.len(), calendar.len()), true);
        Ok(Self {
            calendar,
            tickers,
            prices,
            membership,
        })
    }

    pub fn with_membership(mut self, membership: Array2<bool>) -> Result<Self> {
        if membership.dim() != self.prices.dim() {
            return Err(Error::Argument(format!(
                "membership matrix is {:?}, expected {:?}",
                membership.dim(),
                self.prices.dim()
            )));
        }
        self.membership = membership;
        Ok(self)
    }

    /// Drop a set of tickers entirely (used by exclusion experiments).
    /// Unknown tickers in `excluded` are ignored.
    pub fn without_tickers(&self, excluded: &[String]) -> Result<Self> {
        let drop: HashSet<&str> = excluded.iter().map(|s| s.as_str()).collect();
        let keep: Vec<usize> = (0..self.tickers.len())
            .filter(|&s| !drop.contains(self.tickers[s].as_str()))
            .collect();
        if keep.is_empty() {
            return Err(Error::Validation(
                "exclusion list removes every ticker".into(),
            ));
        }
        let tickers = keep.iter().map(|&s| self.tickers[s].clone()).collect();
        let prices = self.prices.select(ndarray::Axis(0), &keep);
        let membership = self.membership.select(ndarray::Axis(0), &keep);
        let panel = Self {
            calendar: self.calendar.clone(),
            tickers,
            prices,
            membership,
        };
        Ok(panel)
    }

    pub fn calendar(&self) -> &TradingCalendar {
        &self.calendar
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn ticker_index(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    pub fn n_days(&self) -> usize {
        self.calendar.len()
    }

    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }

    pub fn prices(&self) -> &Array2<f64> {
        &self.prices
    }

    pub fn membership(&self) -> &Array2<bool> {
        &self.membership
    }

    pub fn price(&self, stock: usize, day: usize) -> f64 {
        self.prices[(stock, day)]
    }

    pub fn n_missing(&self) -> usize {
        self.prices.iter().filter(|p| p.is_nan()).count()
    }

    /// Last non-missing price at or before `day`, with its day index.
    pub fn last_price_at_or_before(&self, stock: usize, day: usize) -> Option<(usize, f64)> {
        (0..=day)
            .rev()
            .map(|d| (d, self.prices[(stock, d)]))
            .find(|(_, p)| !p.is_nan())
    }

    /// Tickers tradable at `t`: index members on `t` with a full price window
    /// covering the `lookback` days ending at `t` (inclusive, so
    /// `lookback + 1` prices and `lookback` returns).
    pub fn universe_at(&self, t: NaiveDate, lookback: usize) -> Result<Vec<String>> {
        let ti = self
            .calendar
            .index_of(t)
            .ok_or_else(|| Error::Argument(format!("{t} is not a trading day in the panel")))?;
        if ti < lookback {
            return Err(Error::Argument(format!(
                "day {t} is only {ti} days into the calendar, lookback needs {lookback}"
            )));
        }
        let mut out = Vec::new();
        for (s, ticker) in self.tickers.iter().enumerate() {
            if !self.membership[(s, ti)] {
                continue;
            }
            let window_ok = (ti - lookback..=ti).all(|d| !self.prices[(s, d)].is_nan());
            if window_ok {
                out.push(ticker.clone());
            }
        }
        Ok(out)
    }
}

/// Daily simple returns, column `j` realized on `dates[j]`
/// (the price move from the previous trading day into `dates[j]`).
#[derive(Debug, Clone)]
pub struct ReturnsPanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    returns: Array2<f64>,
}

impl ReturnsPanel {
    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn ticker_index(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    pub fn returns(&self) -> &Array2<f64> {
        &self.returns
    }

    /// The `b` returns realized on price days `t-b+1 ..= t`, for the stock's
    /// row. `t` is a price-day index of the originating panel.
    pub fn window_ending_at(&self, stock: usize, t: usize, b: usize) -> Result<ArrayView1<'_, f64>> {
        if t > self.returns.ncols() {
            return Err(Error::Argument(format!(
                "day index {t} beyond panel of {} returns",
                self.returns.ncols()
            )));
        }
        if b > t {
            return Err(Error::Argument(format!(
                "window of {b} returns does not fit before day index {t}"
            )));
        }
        Ok(self.returns.row(stock).slice_move(ndarray::s![t - b..t]))
    }
}

/// Simple returns `p_t / p_{t-1} - 1`; a missing price makes both adjacent
/// returns missing.
pub fn compute_returns(panel: &PricePanel) -> ReturnsPanel {
    let (n, d) = panel.prices().dim();
    let mut returns = Array2::from_elem((n, d.saturating_sub(1)), f64::NAN);
    for s in 0..n {
        for j in 0..d.saturating_sub(1) {
            let p0 = panel.prices()[(s, j)];
            let p1 = panel.prices()[(s, j + 1)];
            if !p0.is_nan() && !p1.is_nan() {
                returns[(s, j)] = p1 / p0 - 1.0;
            }
        }
    }
    ReturnsPanel {
        dates: panel.calendar().days()[1..].to_vec(),
        tickers: panel.tickers().to_vec(),
        returns,
    }
}

/// Load a wide price CSV: header `date,TICKER,...`, ISO-8601 dates, blank
/// cells for missing observations.
pub fn load_prices(path: &Path) -> Result<PricePanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 2 {
        return Err(Error::Validation(format!(
            "{}: header must list a date column and at least one ticker",
            path.display()
        )));
    }
    let tickers: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
    if tickers.iter().any(|t| t.is_empty()) {
        return Err(Error::Validation(format!(
            "{}: blank ticker name in header",
            path.display()
        )));
    }

    let mut dates = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(dates.len() as u64 + 2);
        let date_str = record.get(0).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d").map_err(|_| Error::Parse {
            path: path.display().to_string(),
            line,
            message: format!("bad date {date_str:?}, expected YYYY-MM-DD"),
        })?;
        let mut row = Vec::with_capacity(tickers.len());
        for (i, cell) in record.iter().skip(1).enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                row.push(f64::NAN);
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line,
                message: format!("bad price {cell:?} for {}", tickers[i]),
            })?;
            if value <= 0.0 || !value.is_finite() {
                return Err(Error::Validation(format!(
                    "non-positive price {} for {} on {}",
                    value, tickers[i], date
                )));
            }
            row.push(value);
        }
        dates.push(date);
        rows.push(row);
    }

    let calendar = TradingCalendar::new(dates)?;
    let mut prices = Array2::from_elem((tickers.len(), calendar.len()), f64::NAN);
    for (d, row) in rows.iter().enumerate() {
        for (s, &p) in row.iter().enumerate() {
            prices[(s, d)] = p;
        }
    }
    PricePanel::new(calendar, tickers, prices)
}

/// Write a panel back to the wide CSV format `load_prices` reads.
pub fn write_prices(panel: &PricePanel, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["date".to_string()];
    header.extend(panel.tickers().iter().cloned());
    writer.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (d, date) in panel.calendar().days().iter().enumerate() {
        let mut row = vec![date.format("%Y-%m-%d").to_string()];
        for s in 0..panel.n_tickers() {
            let p = panel.prices()[(s, d)];
            row.push(if p.is_nan() { String::new() } else { format!("{p}") });
        }
        writer.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MembershipAction {
    Add,
    Remove,
}

/// Apply a membership change log to a panel.
///
/// The log is a CSV `date,ticker,action` with `action` in `{add, remove}`;
/// `initial_members` is the index composition on the first calendar day.
/// Changes apply cumulatively: a day's membership reflects every event dated
/// at or before it. Removing a non-member (or re-adding a member) is a
/// validation error.
pub fn load_membership(
    path: &Path,
    panel: &PricePanel,
    initial_members: &[String],
) -> Result<Array2<bool>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let mut events: Vec<(NaiveDate, usize, MembershipAction, u64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse = |message: String| Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        if record.len() != 3 {
            return Err(parse(format!("expected 3 fields, got {}", record.len())));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|_| parse(format!("bad date {:?}", &record[0])))?;
        let ticker = record[1].trim().to_string();
        let stock = panel
            .ticker_index(&ticker)
            .ok_or_else(|| Error::Validation(format!("membership event for unknown ticker {ticker}")))?;
        let action = match record[2].trim() {
            "add" => MembershipAction::Add,
            "remove" => MembershipAction::Remove,
            other => return Err(parse(format!("action must be add or remove, got {other:?}"))),
        };
        let first = panel.calendar().day(0);
        let last = panel.calendar().day(panel.n_days() - 1);
        if date < first || date > last {
            return Err(Error::Validation(format!(
                "membership event on {date} outside calendar range {first}..{last}"
            )));
        }
        events.push((date, stock, action, line));
    }
    events.sort_by_key(|&(date, _, _, line)| (date, line));

    let mut member = vec![false; panel.n_tickers()];
    for name in initial_members {
        let stock = panel
            .ticker_index(name)
            .ok_or_else(|| Error::Validation(format!("initial member {name} not in panel")))?;
        member[stock] = true;
    }

    let mut mask = Array2::from_elem((panel.n_tickers(), panel.n_days()), false);
    let mut next_event = 0usize;
    for (d, &day) in panel.calendar().days().iter().enumerate() {
        while next_event < events.len() && events[next_event].0 <= day {
            let (date, stock, action, _) = events[next_event];
            match action {
                MembershipAction::Add => {
                    if member[stock] {
                        return Err(Error::Validation(format!(
                            "add event on {date} for {} which is already a member",
                            panel.tickers()[stock]
                        )));
                    }
                    member[stock] = true;
                }
                MembershipAction::Remove => {
                    if !member[stock] {
                        return Err(Error::Validation(format!(
                            "remove event on {date} for {} which is not a member",
                            panel.tickers()[stock]
                        )));
                    }
                    member[stock] = false;
                }
            }
            next_event += 1;
        }
        for s in 0..panel.n_tickers() {
            mask[(s, d)] = member[s];
        }
    }
    Ok(mask)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => {
            if let csv::ErrorKind::Io(io) = e.into_kind() {
                Error::io(path, io)
            } else {
                unreachable!()
            }
        }
        _ => {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Parse {
                path: path.display().to_string(),
                line,
                message: e.to_string(),
            }
        }
    }
}
