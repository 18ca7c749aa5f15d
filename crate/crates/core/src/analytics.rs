//! Performance metrics over equity curves, the information-ratio t-test, and
//! comparative report rendering.
//!
//! Ratios whose denominator vanishes are reported as undefined (`None`,
//! rendered "n/a"), never as infinities.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Investment duration in years for a curve of `curve_len` daily points.
pub fn years_of(curve_len: usize) -> f64 {
    curve_len.saturating_sub(1) as f64 / TRADING_DAYS_PER_YEAR
}

/// Daily simple returns of an equity curve.
pub fn curve_returns(values: &[f64]) -> Vec<f64> {
    values
        .windows(2)
        .map(|w| if w[0] != 0.0 { w[1] / w[0] - 1.0 } else { 0.0 })
        .collect()
}

/// Annualized compounded return: (V_end / V_start)^(1/years) − 1.
pub fn arc(values: &[f64], years: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Argument("equity curve needs at least 2 points".into()));
    }
    if years <= 0.0 {
        return Err(Error::Argument(format!("duration {years} years")));
    }
    let (first, last) = (values[0], values[values.len() - 1]);
    if first <= 0.0 || last <= 0.0 || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "equity curve must be positive and finite".into(),
        ));
    }
    Ok((last / first).powf(1.0 / years) - 1.0)
}

fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(var.sqrt())
}

/// Annualized standard deviation of daily returns (sample std × √252).
pub fn asd(daily_returns: &[f64]) -> Result<f64> {
    sample_std(daily_returns)
        .map(|s| s * TRADING_DAYS_PER_YEAR.sqrt())
        .ok_or_else(|| Error::Argument("need at least 2 daily returns".into()))
}

/// Annualized downside deviation: sample std over strictly negative daily
/// returns; undefined with fewer than two losing days.
pub fn downside_deviation(daily_returns: &[f64]) -> Option<f64> {
    let losses: Vec<f64> = daily_returns.iter().copied().filter(|r| *r < 0.0).collect();
    sample_std(&losses).map(|s| s * TRADING_DAYS_PER_YEAR.sqrt())
}

fn ratio(num: f64, denom: f64) -> Option<f64> {
    if denom > 0.0 && denom.is_finite() && num.is_finite() {
        Some(num / denom)
    } else {
        None
    }
}

pub fn ir_star(arc: f64, asd: f64) -> Option<f64> {
    ratio(arc, asd)
}

pub fn sortino(arc: f64, downside: f64) -> Option<f64> {
    ratio(arc, downside)
}

pub fn calmar(arc: f64, mdd: f64) -> Option<f64> {
    ratio(arc, mdd)
}

/// Modified information ratio: ARC² · sign(ARC) / (ASD · MDD).
pub fn ir_double_star(arc: f64, asd: f64, mdd: f64) -> Option<f64> {
    ratio(arc * arc * arc.signum(), asd * mdd)
}

/// Maximum drawdown: largest peak-to-trough loss as a fraction of the peak.
pub fn mdd(values: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &v in values {
        peak = peak.max(v);
        if peak > 0.0 {
            worst = worst.max((peak - v) / peak);
        }
    }
    worst
}

/// Maximum loss duration in years: the longest stretch from a running peak
/// through strictly lower values until the first day strictly exceeding that
/// peak; an unrecovered trailing drawdown counts through the final day.
pub fn mld_years(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut peak = f64::NEG_INFINITY;
    let mut peak_idx = 0usize;
    let mut below_seen = false;
    let mut longest = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if v > peak {
            if below_seen {
                longest = longest.max(i - peak_idx);
            }
            peak = v;
            peak_idx = i;
            below_seen = false;
        } else if v < peak {
            below_seen = true;
        }
    }
    if below_seen {
        longest = longest.max(values.len() - 1 - peak_idx);
    }
    longest as f64 / TRADING_DAYS_PER_YEAR
}

/// The eight performance metrics of one equity curve. Undefined entries are
/// `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub arc: Option<f64>,
    pub asd: Option<f64>,
    pub ir_star: Option<f64>,
    pub sortino: Option<f64>,
    pub mdd: Option<f64>,
    pub mld_years: Option<f64>,
    pub calmar: Option<f64>,
    pub ir_double_star: Option<f64>,
}

pub const METRIC_NAMES: [&str; 8] = [
    "arc",
    "asd",
    "ir_star",
    "sortino",
    "mdd",
    "mld_years",
    "calmar",
    "ir_double_star",
];

/// Whether a larger value of metric row `i` is better (drawdowns, loss
/// duration, and volatility prefer smaller).
pub const METRIC_HIGHER_IS_BETTER: [bool; 8] =
    [true, false, true, true, false, false, true, true];

impl MetricsReport {
    pub fn values(&self) -> [Option<f64>; 8] {
        [
            self.arc,
            self.asd,
            self.ir_star,
            self.sortino,
            self.mdd,
            self.mld_years,
            self.calmar,
            self.ir_double_star,
        ]
    }
}

/// Score an equity curve. Metrics whose inputs are degenerate (flat curve,
/// no losing days, bankrupt curve) come back `None` individually.
pub fn compute_metrics(values: &[f64]) -> MetricsReport {
    let years = years_of(values.len());
    let rets = curve_returns(values);
    let arc_v = arc(values, years).ok();
    let asd_v = asd(&rets).ok();
    let mdd_v = if values.is_empty() { None } else { Some(mdd(values)) };
    let mld_v = if values.is_empty() {
        None
    } else {
        Some(mld_years(values))
    };
    let down = downside_deviation(&rets);
    MetricsReport {
        arc: arc_v,
        asd: asd_v,
        ir_star: arc_v.zip(asd_v).and_then(|(a, s)| ir_star(a, s)),
        sortino: arc_v.zip(down).and_then(|(a, d)| sortino(a, d)),
        mdd: mdd_v,
        mld_years: mld_v,
        calmar: arc_v.zip(mdd_v).and_then(|(a, m)| calmar(a, m)),
        ir_double_star: arc_v
            .zip(asd_v)
            .zip(mdd_v)
            .and_then(|((a, s), m)| ir_double_star(a, s, m)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

/// One-sided t-test of the strategy's IR* exceeding the benchmark's.
///
/// t = (IR*_s − IR*_b) / (σ_d / √n) where σ_d is the sample standard
/// deviation of the daily return differences; df = n − 1; p is the upper
/// tail of the Student's t distribution. Returns `None` when σ_d = 0.
pub fn ir_star_ttest(
    strategy_returns: &[f64],
    benchmark_returns: &[f64],
) -> Result<Option<TTestResult>> {
    if strategy_returns.len() != benchmark_returns.len() {
        return Err(Error::Argument(format!(
            "series lengths differ: {} vs {}",
            strategy_returns.len(),
            benchmark_returns.len()
        )));
    }
    let n = strategy_returns.len();
    if n < 2 {
        return Err(Error::Argument("need at least 2 aligned returns".into()));
    }
    let ir_of = |rets: &[f64]| -> Option<f64> {
        let mut curve = Vec::with_capacity(rets.len() + 1);
        let mut v = 1.0;
        curve.push(v);
        for r in rets {
            v *= 1.0 + r;
            curve.push(v);
        }
        let a = arc(&curve, years_of(curve.len())).ok()?;
        let s = asd(rets).ok()?;
        ir_star(a, s)
    };
    let (Some(ir_s), Some(ir_b)) = (ir_of(strategy_returns), ir_of(benchmark_returns)) else {
        return Ok(None);
    };
    let diffs: Vec<f64> = strategy_returns
        .iter()
        .zip(benchmark_returns)
        .map(|(s, b)| s - b)
        .collect();
    let sigma = sample_std(&diffs).expect("n >= 2");
    if sigma <= 0.0 {
        return Ok(None);
    }
    let se = sigma / (n as f64).sqrt();
    let t = (ir_s - ir_b) / se;
    let df = (n - 1) as f64;
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Numeric(format!("t distribution: {e}")))?;
    let p = 1.0 - dist.cdf(t);
    Ok(Some(TTestResult { t, p, df }))
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "n/a".to_string(),
    }
}

/// Render a comparative metrics table as CSV: one metric per row, one
/// strategy per column. With two or more strategies a final column marks
/// which strategy won the row (direction-aware; ties take the first).
pub fn render_report(names: &[String], reports: &[MetricsReport]) -> Result<String> {
    if names.is_empty() || names.len() != reports.len() {
        return Err(Error::Argument(format!(
            "{} names for {} reports",
            names.len(),
            reports.len()
        )));
    }
    let mark_best = names.len() >= 2;
    let mut out = String::from("metric");
    for name in names {
        out.push(',');
        out.push_str(name);
    }
    if mark_best {
        out.push_str(",best");
    }
    out.push('\n');
    for (row, metric) in METRIC_NAMES.iter().enumerate() {
        out.push_str(metric);
        let mut best: Option<(usize, f64)> = None;
        for (col, report) in reports.iter().enumerate() {
            let v = report.values()[row];
            out.push(',');
            out.push_str(&fmt_opt(v));
            if let Some(x) = v {
                let better = match best {
                    None => true,
                    Some((_, b)) => {
                        if METRIC_HIGHER_IS_BETTER[row] {
                            x > b
                        } else {
                            x < b
                        }
                    }
                };
                if better {
                    best = Some((col, x));
                }
            }
        }
        if mark_best {
            out.push(',');
            out.push_str(best.map_or("n/a".to_string(), |(c, _)| names[c].clone()).as_str());
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_report(names: &[String], reports: &[MetricsReport], path: &Path) -> Result<()> {
    let text = render_report(names, reports)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parse a rendered report back into per-strategy metric values ("n/a" →
/// `None`). Used to verify round-trips and by the comparison harness.
pub fn parse_report(text: &str) -> Result<Vec<(String, MetricsReport)>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Validation("empty report".into()))?;
    let mut cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"metric") {
        return Err(Error::Validation("missing metric header".into()));
    }
    cols.remove(0);
    let has_best = cols.last() == Some(&"best");
    if has_best {
        cols.pop();
    }
    let n = cols.len();
    let mut values = vec![[None; 8]; n];
    for (row, line) in lines.enumerate() {
        if row >= 8 {
            break;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() < n + 1 {
            return Err(Error::Validation(format!("short row {row}")));
        }
        for col in 0..n {
            let cell = parts[col + 1];
            values[col][row] = if cell == "n/a" {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|e| Error::Validation(format!(
                    "row {row} col {col}: {e}"
                )))?)
            };
        }
    }
    Ok(cols
        .iter()
        .zip(values)
        .map(|(name, v)| {
            (
                name.to_string(),
                MetricsReport {
                    arc: v[0],
                    asd: v[1],
                    ir_star: v[2],
                    sortino: v[3],
                    mdd: v[4],
                    mld_years: v[5],
                    calmar: v[6],
                    ir_double_star: v[7],
                },
            )
        })
        .collect())
}
