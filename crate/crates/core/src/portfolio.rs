//! Daily long/short backtest engine: positions sized off classifier
//! probabilities, opened at each rebalance, and monitored against
//! time-decaying take-profit / stop-loss thresholds in between.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::classify::{minmax_apply_row, ScalerParams};
use crate::data::{compute_returns, PricePanel};
use crate::ensemble::EnsembleSpec;
use crate::error::{Error, Result};
use crate::signal::{
    clustering_config_for, snapshot_at, universe_lookback, Direction, Signal,
};
use crate::sponge::SpongeConfig;

/// Sizing, cost, and stop parameters for one backtest run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutionConfig {
    pub start_capital: f64,
    /// Per-side transaction cost as a fraction of traded notional.
    pub tc_rate: f64,
    /// Days between portfolio rebalances.
    pub rebalance_every: usize,
    /// Correlation window used when clustering at each rebalance.
    pub clustering_lookback: usize,
    /// Take-profit scale (the full-period threshold).
    pub tp_scale: f64,
    /// Stop-loss scale.
    pub sl_scale: f64,
    /// Size positions by the simplified Kelly fraction instead of equally.
    pub use_kelly: bool,
    /// Check take-profit / stop-loss thresholds between rebalances at all.
    pub use_stops: bool,
    /// Decay stop thresholds linearly over the holding period.
    pub time_variant_stops: bool,
    /// Multiply stop thresholds by the signal's probability.
    pub risk_weighted_stops: bool,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        Self {
            start_capital: 1000.0,
            tc_rate: 0.0005,
            rebalance_every: 10,
            clustering_lookback: 30,
            tp_scale: 0.08,
            sl_scale: 0.05,
            use_kelly: true,
            use_stops: true,
            time_variant_stops: true,
            risk_weighted_stops: true,
        }
    }
}

impl ExecutionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.start_capital <= 0.0 || !self.start_capital.is_finite() {
            return Err(Error::Argument(format!(
                "start_capital {} must be positive",
                self.start_capital
            )));
        }
        for (name, v) in [
            ("tc_rate", self.tc_rate),
            ("tp_scale", self.tp_scale),
            ("sl_scale", self.sl_scale),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Argument(format!("{name} {v} outside [0, 1)")));
            }
        }
        if self.rebalance_every == 0 {
            return Err(Error::Argument("rebalance_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Simplified Kelly sizing for an even-odds bet with win probability `p`,
/// floored at zero (never bet against the signal).
pub fn kelly_fraction(p: f64) -> f64 {
    (2.0 * p - 1.0).max(0.0)
}

/// Normalize raw leg fractions to sum to one; an all-zero leg falls back to
/// equal weights.
pub fn scale_leg_fractions(raw: &[f64]) -> Vec<f64> {
    if raw.is_empty() {
        return Vec::new();
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return vec![1.0 / raw.len() as f64; raw.len()];
    }
    raw.iter().map(|f| f / total).collect()
}

/// Stop threshold for a position `td` days after its rebalance: the scale
/// decays linearly over a ten-day holding period when time-variant, and is
/// tightened by the signal probability when risk-weighted.
fn stop_threshold(scale: f64, td: usize, prob: f64, cfg: &ExecutionConfig) -> f64 {
    let base = if cfg.time_variant_stops {
        scale * (10.0 - td as f64) / 10.0
    } else {
        scale
    };
    if cfg.risk_weighted_stops {
        base * prob
    } else {
        base
    }
}

pub fn tp_threshold(td: usize, cfg: &ExecutionConfig, prob: f64) -> f64 {
    stop_threshold(cfg.tp_scale, td, prob, cfg)
}

pub fn sl_threshold(td: usize, cfg: &ExecutionConfig, prob: f64) -> f64 {
    stop_threshold(cfg.sl_scale, td, prob, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    TakeProfit,
    StopLoss,
    Rebalance,
    /// Price series ended mid-holding; closed at the last available price.
    Delisted,
}

impl std::fmt::Display for ExitReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ExitReason::TakeProfit => "take_profit",
            ExitReason::StopLoss => "stop_loss",
            ExitReason::Rebalance => "rebalance",
            ExitReason::Delisted => "delisted",
        };
        f.write_str(s)
    }
}

/// One completed round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub ticker: String,
    pub direction: Direction,
    pub entry_date: NaiveDate,
    pub exit_date: NaiveDate,
    /// Share of the leg's unit exposure.
    pub fraction: f64,
    /// Ensemble probability the position was sized from.
    pub prob: f64,
    pub exit_reason: ExitReason,
    /// Direction-adjusted price return over the holding, before costs.
    pub gross_return: f64,
    /// Gross return minus both cost sides on this position's notional.
    pub net_return: f64,
}

/// One day of the equity curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquityPoint {
    pub date: NaiveDate,
    /// Close-of-day equity after any costs charged that day.
    pub equity: f64,
    /// Mark-to-market portfolio return for the day, before costs.
    pub daily_return: f64,
    pub cumulative_costs: f64,
}

#[derive(Debug, Clone)]
pub struct BacktestResult {
    pub equity_curve: Vec<EquityPoint>,
    pub trades: Vec<TradeRecord>,
    /// Signals generated across all rebalances, before filtering.
    pub signals_generated: usize,
    /// Signals that passed the probability filter and were sized > 0.
    pub signals_traded: usize,
    /// Warnings accumulated during the run (delistings, empty rebalances).
    pub warnings: Vec<String>,
}

impl BacktestResult {
    pub fn final_equity(&self) -> f64 {
        self.equity_curve.last().map_or(0.0, |p| p.equity)
    }

    pub fn daily_returns(&self) -> Vec<f64> {
        self.equity_curve
            .windows(2)
            .map(|w| {
                if w[0].equity <= 0.0 {
                    0.0
                } else {
                    w[1].equity / w[0].equity - 1.0
                }
            })
            .collect()
    }
}

/// Probability model applied at each rebalance; absent means accept
/// everything at probability one (the unfiltered base strategy).
pub struct SignalFilter {
    pub ensemble: EnsembleSpec,
    pub scaler: ScalerParams,
    /// Acceptance threshold: keep signals with vote probability strictly
    /// above it.
    pub p2: f64,
}

/// Trading window over price-day indices: first rebalance at `start`, last
/// recorded day `end - 1` (every position is flat by then).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BacktestWindow {
    pub start: usize,
    pub end: usize,
}

struct OpenPosition {
    stock: usize,
    ticker: String,
    direction: Direction,
    fraction: f64,
    prob: f64,
    entry_date: NaiveDate,
    entry_price: f64,
    /// Equity at the rebalance that opened this position; notionals are
    /// fractions of it.
    entry_equity: f64,
    /// Price at the previous mark (for daily return contributions).
    last_price: f64,
}

struct Book {
    equity: f64,
    costs: f64,
    positions: Vec<OpenPosition>,
    trades: Vec<TradeRecord>,
    bankrupt: bool,
}

impl Book {
    fn charge(&mut self, cost: f64) {
        self.equity -= cost;
        self.costs += cost;
        if self.equity <= 0.0 {
            self.equity = 0.0;
            self.bankrupt = true;
        }
    }

    fn close(&mut self, idx: usize, exit_date: NaiveDate, exit_price: f64, reason: ExitReason, tc: f64) {
        let pos = self.positions.remove(idx);
        let growth = exit_price / pos.entry_price;
        let gross = pos.direction.sign() * (growth - 1.0);
        // Entry side charged 1x the opening notional, exit side the closing
        // notional.
        let exit_cost = tc * pos.fraction * pos.entry_equity * growth;
        self.charge(exit_cost);
        self.trades.push(TradeRecord {
            ticker: pos.ticker,
            direction: pos.direction,
            entry_date: pos.entry_date,
            exit_date,
            fraction: pos.fraction,
            prob: pos.prob,
            exit_reason: reason,
            gross_return: gross,
            net_return: gross - tc * (1.0 + growth),
        });
    }
}

/// Run the full strategy over `window`: cluster/signal/filter at every
/// rebalance, mark and stop-check daily, account costs per side.
pub fn run_backtest(
    panel: &PricePanel,
    filter: Option<&SignalFilter>,
    cfg: &ExecutionConfig,
    sponge: &SpongeConfig,
    master_seed: u64,
    window: BacktestWindow,
) -> Result<BacktestResult> {
    cfg.validate()?;
    let lookback = universe_lookback(cfg.clustering_lookback);
    if window.start < lookback {
        return Err(Error::Argument(format!(
            "window starts at day {}, but clustering needs {lookback} days of history",
            window.start
        )));
    }
    if window.end > panel.n_days() {
        return Err(Error::Argument(format!(
            "window ends at day {}, panel has {}",
            window.end,
            panel.n_days()
        )));
    }
    if window.start >= window.end {
        return Err(Error::Argument("empty backtest window".into()));
    }

    let returns = compute_returns(panel);
    let mut book = Book {
        equity: cfg.start_capital,
        costs: 0.0,
        positions: Vec::new(),
        trades: Vec::new(),
        bankrupt: false,
    };
    let mut curve = Vec::with_capacity(window.end - window.start);
    let mut warnings = Vec::new();
    let mut signals_generated = 0usize;
    let mut signals_traded = 0usize;
    let mut last_rebalance = window.start;

    for day in window.start..window.end {
        let date = panel.calendar().day(day);
        let mut daily_return = 0.0;

        if book.bankrupt {
            curve.push(EquityPoint {
                date,
                equity: 0.0,
                daily_return: 0.0,
                cumulative_costs: book.costs,
            });
            continue;
        }

        // 1. Mark open positions to market and accumulate the day's return.
        let mut delisted = Vec::new();
        for (i, pos) in book.positions.iter_mut().enumerate() {
            let price = panel.price(pos.stock, day);
            if price.is_nan() {
                delisted.push(i);
                continue;
            }
            let r = price / pos.last_price - 1.0;
            daily_return += pos.direction.sign() * pos.fraction * r;
            pos.last_price = price;
        }
        book.equity *= 1.0 + daily_return;
        if book.equity <= 0.0 {
            book.equity = 0.0;
            book.bankrupt = true;
            book.positions.clear();
            curve.push(EquityPoint {
                date,
                equity: 0.0,
                daily_return,
                cumulative_costs: book.costs,
            });
            continue;
        }

        // 2. Force-close positions whose price series went dark, at their
        // last available price.
        for &i in delisted.iter().rev() {
            let pos = &book.positions[i];
            warnings.push(format!(
                "{}: no price for {} on {date}, closing at last available",
                pos.ticker, date
            ));
            let last = pos.last_price;
            book.close(i, date, last, ExitReason::Delisted, cfg.tc_rate);
        }

        let is_rebalance =
            (day - last_rebalance) % cfg.rebalance_every == 0 && day != window.start || day == window.start;
        let is_last_day = day + 1 == window.end;

        if is_rebalance || is_last_day {
            // 3a. Rebalance-day close takes precedence over stop checks.
            while let Some(pos) = book.positions.first() {
                let price = pos.last_price;
                book.close(0, date, price, ExitReason::Rebalance, cfg.tc_rate);
            }
        } else if cfg.use_stops {
            // 3b. Stop checks against direction-adjusted cumulative returns.
            let td = day - last_rebalance;
            let mut i = 0;
            while i < book.positions.len() {
                let pos = &book.positions[i];
                let cumret = pos.direction.sign() * (pos.last_price / pos.entry_price - 1.0);
                if cumret >= tp_threshold(td, cfg, pos.prob) {
                    let price = pos.last_price;
                    book.close(i, date, price, ExitReason::TakeProfit, cfg.tc_rate);
                } else if cumret <= -sl_threshold(td, cfg, pos.prob) {
                    let price = pos.last_price;
                    book.close(i, date, price, ExitReason::StopLoss, cfg.tc_rate);
                } else {
                    i += 1;
                }
            }
        }

        // 4. Open the next holding period's book.
        if is_rebalance && !is_last_day && !book.bankrupt {
            last_rebalance = day;
            match open_positions(
                panel, &returns, filter, cfg, sponge, master_seed, day, date, &mut book,
            ) {
                Ok((generated, traded)) => {
                    signals_generated += generated;
                    signals_traded += traded;
                }
                Err(Error::Validation(msg)) | Err(Error::Numeric(msg)) => {
                    // A rebalance that cannot price (e.g. degenerate
                    // correlation window) stays flat until the next one.
                    warnings.push(format!("{date}: rebalance skipped: {msg}"));
                }
                Err(e) => return Err(e),
            }
        }

        curve.push(EquityPoint {
            date,
            equity: book.equity,
            daily_return,
            cumulative_costs: book.costs,
        });
    }

    Ok(BacktestResult {
        equity_curve: curve,
        trades: book.trades,
        signals_generated,
        signals_traded,
        warnings,
    })
}

/// Cluster, signal, filter, size, and open positions at one rebalance.
/// Returns (signals generated, signals traded).
#[allow(clippy::too_many_arguments)]
fn open_positions(
    panel: &PricePanel,
    returns: &crate::data::ReturnsPanel,
    filter: Option<&SignalFilter>,
    cfg: &ExecutionConfig,
    sponge: &SpongeConfig,
    master_seed: u64,
    day: usize,
    date: NaiveDate,
    book: &mut Book,
) -> Result<(usize, usize)> {
    let lookback = universe_lookback(cfg.clustering_lookback);
    let universe = panel.universe_at(date, lookback)?;
    if universe.len() < 2 {
        return Err(Error::Validation(format!(
            "only {} tradable tickers at {date}",
            universe.len()
        )));
    }
    let sponge_cfg = clustering_config_for(sponge, master_seed, date);
    let snapshot = snapshot_at(returns, &universe, date, cfg.clustering_lookback, &sponge_cfg)?;
    let generated = snapshot.signals.len();

    // Attach an acceptance probability to every signal.
    let mut accepted: Vec<(Signal, f64)> = Vec::new();
    match filter {
        None => {
            for sig in snapshot.signals {
                accepted.push((sig, 1.0));
            }
        }
        Some(f) => {
            for (sig, feat) in snapshot.signals.into_iter().zip(&snapshot.features) {
                let feat_arr = ndarray::Array1::from(feat.to_array().to_vec());
                let scaled = minmax_apply_row(feat_arr.view(), &f.scaler)?;
                let p = f.ensemble.soft_vote(scaled.view())?;
                if p > f.p2 {
                    accepted.push((sig, p));
                }
            }
        }
    }

    // Size each leg separately; fractions per leg sum to one.
    let equity = book.equity;
    let mut traded = 0usize;
    for direction in [Direction::Long, Direction::Short] {
        let leg: Vec<&(Signal, f64)> = accepted
            .iter()
            .filter(|(s, _)| s.direction == direction)
            .collect();
        if leg.is_empty() {
            continue;
        }
        let raw: Vec<f64> = leg
            .iter()
            .map(|(_, p)| if cfg.use_kelly { kelly_fraction(*p) } else { 1.0 })
            .collect();
        let fractions = scale_leg_fractions(&raw);
        for ((sig, prob), fraction) in leg.into_iter().zip(fractions) {
            if fraction <= 0.0 {
                continue;
            }
            let stock = panel
                .ticker_index(&sig.ticker)
                .ok_or_else(|| Error::Validation(format!("unknown ticker {}", sig.ticker)))?;
            let entry_price = panel.price(stock, day);
            if entry_price.is_nan() {
                return Err(Error::Validation(format!(
                    "no price for {} at {date}",
                    sig.ticker
                )));
            }
            book.charge(cfg.tc_rate * fraction * equity);
            if book.bankrupt {
                return Ok((generated, traded));
            }
            book.positions.push(OpenPosition {
                stock,
                ticker: sig.ticker.clone(),
                direction,
                fraction,
                prob: *prob,
                entry_date: date,
                entry_price,
                entry_equity: equity,
                last_price: entry_price,
            });
            traded += 1;
        }
    }
    Ok((generated, traded))
}

/// Write the trade log as CSV.
pub fn write_trades(trades: &[TradeRecord], path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    wtr.write_record([
        "ticker",
        "direction",
        "entry_date",
        "exit_date",
        "fraction",
        "prob",
        "exit_reason",
        "gross_return",
        "net_return",
    ])
    .map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    for t in trades {
        wtr.write_record([
            t.ticker.clone(),
            t.direction.to_string(),
            t.entry_date.to_string(),
            t.exit_date.to_string(),
            format!("{}", t.fraction),
            format!("{}", t.prob),
            t.exit_reason.to_string(),
            format!("{}", t.gross_return),
            format!("{}", t.net_return),
        ])
        .map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

/// Write the equity curve as CSV: date, equity, daily return, cumulative
/// costs.
pub fn write_equity_curve(curve: &[EquityPoint], path: &Path) -> Result<()> {
    let mut out = String::from("date,equity,daily_return,cumulative_costs\n");
    for p in curve {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.date, p.equity, p.daily_return, p.cumulative_costs
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read back an equity curve CSV (date, equity in the first two columns).
pub fn load_equity_curve(path: &Path) -> Result<Vec<(NaiveDate, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(d), Some(v)) = (parts.next(), parts.next()) else {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: (i + 1) as u64,
                message: "expected at least two columns".into(),
            });
        };
        let date = d.parse::<NaiveDate>().map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: (i + 1) as u64,
            message: e.to_string(),
        })?;
        let value = v.parse::<f64>().map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: (i + 1) as u64,
            message: e.to_string(),
        })?;
        out.push((date, value));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{planted_panel, PlantedMarket};

    #[test]
    fn kelly_fraction_examples() {
        assert_eq!(kelly_fraction(0.5), 0.0);
        assert_eq!(kelly_fraction(0.75), 0.5);
        assert_eq!(kelly_fraction(1.0), 1.0);
        assert_eq!(kelly_fraction(0.3), 0.0);
    }

    #[test]
    fn leg_scaling_examples() {
        let scaled = scale_leg_fractions(&[0.2, 0.6]);
        assert!((scaled[0] - 0.25).abs() < 1e-12);
        assert!((scaled[1] - 0.75).abs() < 1e-12);
        assert_eq!(scale_leg_fractions(&[0.4]), vec![1.0]);
        assert_eq!(
            scale_leg_fractions(&[0.0, 0.0, 0.0, 0.0]),
            vec![0.25; 4]
        );
        let sum: f64 = scale_leg_fractions(&[0.9, 0.01, 0.3]).iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stop_threshold_shapes() {
        let cfg = ExecutionConfig {
            tp_scale: 0.08,
            sl_scale: 0.05,
            time_variant_stops: true,
            risk_weighted_stops: false,
            ..ExecutionConfig::default()
        };
        assert!((tp_threshold(5, &cfg, 1.0) - 0.04).abs() < 1e-12);
        // The decayed threshold averages to half the scale over days 1..=9.
        let mean: f64 = (1..=9).map(|td| tp_threshold(td, &cfg, 1.0)).sum::<f64>() / 9.0;
        assert!((mean - 0.04).abs() < 1e-12);

        let rw = ExecutionConfig {
            risk_weighted_stops: true,
            ..cfg.clone()
        };
        assert!((tp_threshold(5, &rw, 0.75) - 0.03).abs() < 1e-12);

        let flat = ExecutionConfig {
            time_variant_stops: false,
            risk_weighted_stops: false,
            ..cfg
        };
        for td in 0..10 {
            assert_eq!(tp_threshold(td, &flat, 0.2), 0.08);
            assert_eq!(sl_threshold(td, &flat, 0.2), 0.05);
        }
    }

    fn test_market() -> PricePanel {
        planted_panel(&PlantedMarket {
            n_stocks: 16,
            n_days: 140,
            n_blocks: 2,
            seed: 5,
            ..PlantedMarket::default()
        })
        .unwrap()
        .0
    }

    fn test_sponge() -> SpongeConfig {
        SpongeConfig {
            fixed_k: Some(2),
            kmeans_restarts: 3,
            ..SpongeConfig::default()
        }
    }

    fn base_cfg() -> ExecutionConfig {
        ExecutionConfig {
            clustering_lookback: 30,
            ..ExecutionConfig::default()
        }
    }

    #[test]
    fn backtest_is_deterministic() {
        let panel = test_market();
        let window = BacktestWindow { start: 30, end: 120 };
        let run = || {
            run_backtest(&panel, None, &base_cfg(), &test_sponge(), 7, window).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.equity_curve.len(), b.equity_curve.len());
        for (x, y) in a.equity_curve.iter().zip(&b.equity_curve) {
            assert_eq!(x.equity, y.equity);
        }
        assert_eq!(a.trades.len(), b.trades.len());
    }

    #[test]
    fn positions_never_survive_a_rebalance() {
        let panel = test_market();
        let window = BacktestWindow { start: 30, end: 120 };
        let result =
            run_backtest(&panel, None, &base_cfg(), &test_sponge(), 7, window).unwrap();
        assert!(!result.trades.is_empty());
        for t in &result.trades {
            let held = (t.exit_date - t.entry_date).num_days();
            // Ten trading days spans at most 14 calendar days on a
            // weekday calendar.
            assert!(held <= 14, "{} held {held} calendar days", t.ticker);
            assert!(t.exit_date > t.entry_date);
        }
    }

    #[test]
    fn leg_fractions_sum_to_one_per_rebalance() {
        let panel = test_market();
        let window = BacktestWindow { start: 30, end: 120 };
        let result =
            run_backtest(&panel, None, &base_cfg(), &test_sponge(), 7, window).unwrap();
        use std::collections::HashMap;
        let mut sums: HashMap<(NaiveDate, Direction), f64> = HashMap::new();
        for t in &result.trades {
            *sums.entry((t.entry_date, t.direction)).or_insert(0.0) += t.fraction;
        }
        for ((date, dir), sum) in sums {
            assert!(
                (sum - 1.0).abs() < 1e-12,
                "{date} {dir} leg sums to {sum}"
            );
        }
    }

    #[test]
    fn zero_cost_run_charges_nothing() {
        let panel = test_market();
        let cfg = ExecutionConfig {
            tc_rate: 0.0,
            ..base_cfg()
        };
        let window = BacktestWindow { start: 30, end: 100 };
        let result = run_backtest(&panel, None, &cfg, &test_sponge(), 7, window).unwrap();
        assert_eq!(result.equity_curve.last().unwrap().cumulative_costs, 0.0);
    }

    #[test]
    fn costs_match_traded_notional() {
        let panel = test_market();
        let cfg = base_cfg();
        let window = BacktestWindow { start: 30, end: 120 };
        let result = run_backtest(&panel, None, &cfg, &test_sponge(), 7, window).unwrap();
        assert!(result.equity_curve.last().unwrap().cumulative_costs > 0.0);
        // Every trade's net return embeds exactly two cost sides.
        for t in &result.trades {
            let underlying = match t.direction {
                Direction::Long => 1.0 + t.gross_return,
                Direction::Short => 1.0 - t.gross_return,
            };
            let expect = t.gross_return - cfg.tc_rate * (1.0 + underlying);
            assert!((t.net_return - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_when_no_signal_passes() {
        let panel = test_market();
        // An impossible threshold rejects everything: equity stays at the
        // start capital and nothing is traded.
        let filter = SignalFilter {
            ensemble: EnsembleSpec::new(
                vec![crate::classify::TrainedModel {
                    spec: crate::classify::ClassifierSpec::Logistic(
                        crate::classify::LogisticParams::default(),
                    ),
                    seed: 0,
                    params: crate::classify::ModelParams::Prior { p: 0.5 },
                }],
                vec![1.0],
            )
            .unwrap(),
            scaler: ScalerParams {
                min: vec![0.0; 9],
                max: vec![1.0; 9],
                clip: false,
            },
            p2: 1.1,
        };
        let window = BacktestWindow { start: 30, end: 100 };
        let result =
            run_backtest(&panel, Some(&filter), &base_cfg(), &test_sponge(), 7, window).unwrap();
        assert!(result.trades.is_empty());
        assert_eq!(result.signals_traded, 0);
        assert!(result.signals_generated > 0);
        for p in &result.equity_curve {
            assert_eq!(p.equity, 1000.0);
            assert_eq!(p.cumulative_costs, 0.0);
        }
    }

    #[test]
    fn equity_conservation_identity() {
        let panel = test_market();
        let cfg = base_cfg();
        let window = BacktestWindow { start: 30, end: 120 };
        let result = run_backtest(&panel, None, &cfg, &test_sponge(), 7, window).unwrap();
        // equity_t = equity_{t-1} * (1 + daily_return_t) - costs_t
        let mut prev_equity = cfg.start_capital;
        let mut prev_costs = 0.0;
        for p in &result.equity_curve {
            let day_costs = p.cumulative_costs - prev_costs;
            let expect = prev_equity * (1.0 + p.daily_return) - day_costs;
            assert!(
                (p.equity - expect).abs() < 1e-9,
                "{}: {} vs {expect}",
                p.date,
                p.equity
            );
            prev_equity = p.equity;
            prev_costs = p.cumulative_costs;
        }
    }

    #[test]
    fn stop_flags_change_exit_mix() {
        let panel = test_market();
        let window = BacktestWindow { start: 30, end: 130 };
        let with_stops = run_backtest(
            &panel,
            None,
            &ExecutionConfig {
                use_stops: true,
                time_variant_stops: false,
                risk_weighted_stops: false,
                tp_scale: 0.01,
                sl_scale: 0.01,
                ..base_cfg()
            },
            &test_sponge(),
            7,
            window,
        )
        .unwrap();
        let without = run_backtest(
            &panel,
            None,
            &ExecutionConfig {
                use_stops: false,
                ..base_cfg()
            },
            &test_sponge(),
            7,
            window,
        )
        .unwrap();
        let stop_exits = with_stops
            .trades
            .iter()
            .filter(|t| matches!(t.exit_reason, ExitReason::TakeProfit | ExitReason::StopLoss))
            .count();
        assert!(stop_exits > 0, "1% flat stops should trigger");
        assert!(without
            .trades
            .iter()
            .all(|t| t.exit_reason == ExitReason::Rebalance));
    }

    #[test]
    fn trade_and_curve_files_round_trip(){
        let panel = test_market();
        let window = BacktestWindow { start: 30, end: 100 };
        let result =
            run_backtest(&panel, None, &base_cfg(), &test_sponge(), 7, window).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let tpath = dir.path().join("trades.csv");
        let epath = dir.path().join("equity.csv");
        write_trades(&result.trades, &tpath).unwrap();
        write_equity_curve(&result.equity_curve, &epath).unwrap();
        let curve = load_equity_curve(&epath).unwrap();
        assert_eq!(curve.len(), result.equity_curve.len());
        for (loaded, original) in curve.iter().zip(&result.equity_curve) {
            assert_eq!(loaded.0, original.date);
            assert_eq!(loaded.1, original.equity);
        }
        let text = std::fs::read_to_string(&tpath).unwrap();
        assert_eq!(text.lines().count(), result.trades.len() + 1);
    }

    #[test]
    fn bad_configs_rejected() {
        let panel = test_market();
        let window = BacktestWindow { start: 30, end: 100 };
        for cfg in [
            ExecutionConfig { tc_rate: 1.0, ..base_cfg() },
            ExecutionConfig { start_capital: 0.0, ..base_cfg() },
            ExecutionConfig { rebalance_every: 0, ..base_cfg() },
            ExecutionConfig { sl_scale: -0.1, ..base_cfg() },
        ] {
            assert!(run_backtest(&panel, None, &cfg, &test_sponge(), 7, window).is_err());
        }
        // Window must leave room for the clustering lookback.
        assert!(run_backtest(
            &panel,
            None,
            &base_cfg(),
            &test_sponge(),
            7,
            BacktestWindow { start: 5, end: 100 }
        )
        .is_err());
    }
}
