//! Mean-reversion signal generation, per-signal feature extraction, and
//! construction of the labeled training dataset.
//!
//! A signal fires when a stock's compounded five-day return sits strictly
//! above or below the mean of its cluster: below means the stock lagged its
//! peers and is bought (long), above means it ran ahead and is sold (short).
//! Each signal carries nine numeric features describing the cluster geometry
//! and recent returns, and — during dataset construction — a binary label
//! saying whether the trade would have paid off over the holding period.

use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::data::{compute_returns, PricePanel, ReturnsPanel};
use crate::error::{Error, Result};
use crate::graph::{correlation_graph, SignedGraph};
use crate::seed::sub_seed;
use crate::sponge::{sponge_sym, ClusterAssignment, SpongeConfig};

/// Trade side of a signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Long,
    Short,
}

impl Direction {
    /// +1 for long, -1 for short; used both as a model feature and to
    /// direction-adjust underlying returns.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Long => 1.0,
            Direction::Short => -1.0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Long => write!(f, "long"),
            Direction::Short => write!(f, "short"),
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long" => Ok(Direction::Long),
            "short" => Ok(Direction::Short),
            other => Err(Error::Argument(format!("unknown direction {other:?}"))),
        }
    }
}

/// One tradeable divergence between a stock and its cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub ticker: String,
    pub date: NaiveDate,
    pub direction: Direction,
    /// Five-day compounded return minus the cluster mean; negative for longs,
    /// positive for shorts.
    pub deviation: f64,
    pub cluster_id: usize,
}

/// The nine model inputs extracted for every signal. Field order here is the
/// column order of the exported dataset and of the model input vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Stock's mean edge weight to the rest of its cluster.
    pub local_vertex_degree: f64,
    /// Stock's mean edge weight to the rest of the whole graph.
    pub global_vertex_degree: f64,
    /// Cluster-wide average of the members' local degrees.
    pub graph_density: f64,
    /// Cluster size over graph size, in (0, 1].
    pub cluster_size_ratio: f64,
    /// Number of clusters over graph size, in (0, 1].
    pub cluster_count_ratio: f64,
    /// The signal's deviation from the cluster's five-day mean.
    pub deviation_5d: f64,
    /// +1 long / -1 short.
    pub direction_sign: f64,
    /// Arithmetic mean of the cluster's daily returns over the last 10 days.
    pub cluster_mean_ret_10d: f64,
    /// Arithmetic mean of the stock's daily returns over the last 10 days.
    pub stock_mean_ret_10d: f64,
}

impl FeatureVector {
    pub const NAMES: [&'static str; 9] = [
        "local_vertex_degree",
        "global_vertex_degree",
        "graph_density",
        "cluster_size_ratio",
        "cluster_count_ratio",
        "deviation_5d",
        "direction_sign",
        "cluster_mean_ret_10d",
        "stock_mean_ret_10d",
    ];

    pub fn to_array(self) -> [f64; 9] {
        [
            self.local_vertex_degree,
            self.global_vertex_degree,
            self.graph_density,
            self.cluster_size_ratio,
            self.cluster_count_ratio,
            self.deviation_5d,
            self.direction_sign,
            self.cluster_mean_ret_10d,
            self.stock_mean_ret_10d,
        ]
    }

    pub fn from_array(x: [f64; 9]) -> Self {
        Self {
            local_vertex_degree: x[0],
            global_vertex_degree: x[1],
            graph_density: x[2],
            cluster_size_ratio: x[3],
            cluster_count_ratio: x[4],
            deviation_5d: x[5],
            direction_sign: x[6],
            cluster_mean_ret_10d: x[7],
            stock_mean_ret_10d: x[8],
        }
    }
}

/// Which profitability rule a holding-period path satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelCondition {
    /// Neither rule fired; the sample is labeled 0.
    None,
    /// Some day's cumulative position return exceeded the profit threshold.
    ThresholdHit,
    /// The final cumulative position return exceeded the round-trip cost.
    BeatCosts,
}

/// A signal with its features and holding-period outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub label: u8,
    pub condition: LabelCondition,
    pub ticker: String,
    pub date: NaiveDate,
    pub direction: Direction,
}

/// The projection of a sample that is written to / read from dataset CSVs
/// (the triggering condition is an in-memory diagnostic only).
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub features: FeatureVector,
    pub label: u8,
    pub ticker: String,
    pub date: NaiveDate,
    pub direction: Direction,
}

impl LabeledSample {
    pub fn to_row(&self) -> DatasetRow {
        DatasetRow {
            features: self.features,
            label: self.label,
            ticker: self.ticker.clone(),
            date: self.date,
            direction: self.direction,
        }
    }
}

/// Compounded cumulative return of a window of simple daily returns.
fn compounded(window: ArrayView1<'_, f64>) -> f64 {
    window.iter().fold(1.0, |acc, r| acc * (1.0 + r)) - 1.0
}

/// Price-day index for a date that must carry a realized return.
fn price_day_index(returns: &ReturnsPanel, t: NaiveDate) -> Result<usize> {
    returns
        .dates()
        .iter()
        .position(|&d| d == t)
        .map(|j| j + 1)
        .ok_or_else(|| Error::Argument(format!("{t} has no realized return in the panel")))
}

/// Emit long/short signals for every clustered stock whose five-day
/// compounded return differs from its cluster's mean.
///
/// Strictly below the mean opens a long, strictly above a short; a stock
/// exactly at the mean stays flat. Singleton clusters never emit (the lone
/// member's deviation is identically zero). Every clustered ticker must have
/// five gap-free returns ending at `t`.
pub fn generate_signals(
    assignment: &ClusterAssignment,
    returns: &ReturnsPanel,
    t: NaiveDate,
) -> Result<Vec<Signal>> {
    let ti = price_day_index(returns, t)?;
    let mut cumrets = Vec::with_capacity(assignment.tickers().len());
    for name in assignment.tickers() {
        let s = returns
            .ticker_index(name)
            .ok_or_else(|| Error::Argument(format!("unknown ticker {name}")))?;
        let window = returns.window_ending_at(s, ti, 5)?;
        if window.iter().any(|r| r.is_nan()) {
            return Err(Error::Validation(format!(
                "{name} has a gap in the five-day window ending {t}"
            )));
        }
        cumrets.push(compounded(window));
    }

    let mut signals = Vec::new();
    for (cluster_id, members) in assignment.clusters().into_iter().enumerate() {
        let mean = members.iter().map(|&m| cumrets[m]).sum::<f64>() / members.len() as f64;
        for &m in &members {
            let deviation = cumrets[m] - mean;
            let direction = if cumrets[m] < mean {
                Direction::Long
            } else if cumrets[m] > mean {
                Direction::Short
            } else {
                continue;
            };
            signals.push(Signal {
                ticker: assignment.tickers()[m].clone(),
                date: t,
                direction,
                deviation,
                cluster_id,
            });
        }
    }
    Ok(signals)
}

/// Mean of a gap-free 10-day return window ending at price-day `ti`.
fn mean_ret_10d(returns: &ReturnsPanel, stock: usize, ti: usize, name: &str) -> Result<f64> {
    let window = returns.window_ending_at(stock, ti, 10)?;
    if window.iter().any(|r| r.is_nan()) {
        return Err(Error::Validation(format!(
            "{name} has a gap in the ten-day feature window"
        )));
    }
    Ok(window.sum() / window.len() as f64)
}

/// Compute the nine features for one signal against the graph and clustering
/// it came from. The signal's cluster must have at least two members.
pub fn extract_features(
    sig: &Signal,
    graph: &SignedGraph,
    assignment: &ClusterAssignment,
    returns: &ReturnsPanel,
) -> Result<FeatureVector> {
    let gi = graph
        .tickers()
        .iter()
        .position(|name| name == &sig.ticker)
        .ok_or_else(|| Error::Argument(format!("{} is not a graph vertex", sig.ticker)))?;
    let ai = assignment
        .tickers()
        .iter()
        .position(|name| name == &sig.ticker)
        .ok_or_else(|| Error::Argument(format!("{} is not clustered", sig.ticker)))?;
    let label = assignment.labels()[ai];

    // Cluster members resolved to graph vertex indices.
    let mut members = Vec::new();
    for (node, &l) in assignment.labels().iter().enumerate() {
        if l != label {
            continue;
        }
        let name = &assignment.tickers()[node];
        let idx = graph
            .tickers()
            .iter()
            .position(|g| g == name)
            .ok_or_else(|| Error::Argument(format!("cluster member {name} is not a graph vertex")))?;
        members.push(idx);
    }
    let s_size = members.len();
    let g_size = graph.n();
    if s_size < 2 {
        return Err(Error::Argument(format!(
            "{} sits in a singleton cluster; local degree is undefined",
            sig.ticker
        )));
    }

    let a = graph.adjacency();
    let cluster_row_sum = |i: usize| members.iter().map(|&n| a[(i, n)]).sum::<f64>();

    let local_vertex_degree = (cluster_row_sum(gi) - 1.0) / (s_size as f64 - 1.0);
    let global_vertex_degree = (a.row(gi).sum() - 1.0) / (g_size as f64 - 1.0);
    let graph_density = members
        .iter()
        .map(|&i| cluster_row_sum(i) - 1.0)
        .sum::<f64>()
        / ((s_size as f64 - 1.0) * s_size as f64);

    let ti = price_day_index(returns, sig.date)?;
    let mut cluster_mean_ret_10d = 0.0;
    for &m in &members {
        let name = &graph.tickers()[m];
        let stock = returns
            .ticker_index(name)
            .ok_or_else(|| Error::Argument(format!("unknown ticker {name}")))?;
        cluster_mean_ret_10d += mean_ret_10d(returns, stock, ti, name)?;
    }
    cluster_mean_ret_10d /= s_size as f64;
    let stock = returns
        .ticker_index(&sig.ticker)
        .ok_or_else(|| Error::Argument(format!("unknown ticker {}", sig.ticker)))?;
    let stock_mean_ret_10d = mean_ret_10d(returns, stock, ti, &sig.ticker)?;

    Ok(FeatureVector {
        local_vertex_degree,
        global_vertex_degree,
        graph_density,
        cluster_size_ratio: s_size as f64 / g_size as f64,
        cluster_count_ratio: assignment.k() as f64 / g_size as f64,
        deviation_5d: sig.deviation,
        direction_sign: sig.direction.sign(),
        cluster_mean_ret_10d,
        stock_mean_ret_10d,
    })
}

/// Label a holding-period path of cumulative, direction-adjusted position
/// returns. The trade counts as profitable if some day's cumulative return
/// exceeded `threshold`, or failing that, if the final cumulative return at
/// least covered the round-trip transaction cost. An empty path is labeled 0.
pub fn label_signal(path: &[f64], threshold: f64, roundtrip_cost: f64) -> (u8, LabelCondition) {
    if path.iter().any(|&x| x > threshold) {
        (1, LabelCondition::ThresholdHit)
    } else if path.last().is_some_and(|&x| x > roundtrip_cost) {
        (1, LabelCondition::BeatCosts)
    } else {
        (0, LabelCondition::None)
    }
}

/// Cumulative direction-adjusted position returns for each day a position
/// opened at the close of price-day `entry_day` stays on over the next
/// `horizon` trading days. Compounding stops at the first missing return
/// (the position would have been force-closed there), so the path may be
/// shorter than `horizon`.
pub fn holding_path(
    returns: &ReturnsPanel,
    stock: usize,
    entry_day: usize,
    horizon: usize,
    direction: Direction,
) -> Vec<f64> {
    let n = returns.returns().ncols();
    let mut path = Vec::with_capacity(horizon);
    let mut growth = 1.0;
    for j in 0..horizon {
        // return realized on price-day entry_day + 1 + j lives in column
        // entry_day + j
        let col = entry_day + j;
        if col >= n {
            break;
        }
        let r = returns.returns()[(stock, col)];
        if r.is_nan() {
            break;
        }
        growth *= 1.0 + r;
        path.push(direction.sign() * (growth - 1.0));
    }
    path
}

/// Per-rebalance clustering seed: one independent stream per trading day so
/// that re-running any single rebalance reproduces the run.
pub fn clustering_seed(master_seed: u64, date: NaiveDate) -> u64 {
    sub_seed(master_seed, &format!("sponge:{date}"))
}

/// Clone of `base` with its seed re-derived for the given rebalance date.
pub fn clustering_config_for(base: &SpongeConfig, master_seed: u64, date: NaiveDate) -> SpongeConfig {
    let mut cfg = base.clone();
    cfg.seed = clustering_seed(master_seed, date);
    cfg
}

/// Everything one rebalance produces before money gets involved: the
/// correlation graph over the eligible universe, its clustering, and the
/// resulting signals with features.
#[derive(Debug, Clone)]
pub struct RebalanceSnapshot {
    pub date: NaiveDate,
    pub graph: SignedGraph,
    pub assignment: ClusterAssignment,
    pub signals: Vec<Signal>,
    pub features: Vec<FeatureVector>,
    /// Universe tickers dropped for gaps or zero variance in the window.
    pub dropped: Vec<String>,
}

/// Cluster the universe at `t` over a `lookback`-day return window and emit
/// signals with features. `sponge.seed` is used as-is; derive it per date
/// with [`clustering_config_for`] when running a schedule.
pub fn snapshot_at(
    returns: &ReturnsPanel,
    universe: &[String],
    t: NaiveDate,
    lookback: usize,
    sponge: &SpongeConfig,
) -> Result<RebalanceSnapshot> {
    let (graph, dropped) = correlation_graph(returns, universe, t, lookback)?;
    let assignment = sponge_sym(&graph, sponge)?;
    let signals = generate_signals(&assignment, returns, t)?;
    let features = signals
        .iter()
        .map(|sig| extract_features(sig, &graph, &assignment, returns))
        .collect::<Result<Vec<_>>>()?;
    Ok(RebalanceSnapshot {
        date: t,
        graph,
        assignment,
        signals,
        features,
        dropped,
    })
}

/// Schedule and labeling parameters for building the training dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Days between rebalances (also the label holding period).
    pub rebalance_every: usize,
    /// Correlation window length in trading days.
    pub clustering_lookback: usize,
    /// Number of leading trading days the dataset is built from.
    pub insample_days: usize,
    /// Profit threshold for the intrapath labeling rule.
    pub label_threshold: f64,
    /// Round-trip transaction cost for the fallback labeling rule.
    pub roundtrip_cost: f64,
    /// Master seed; per-rebalance clustering seeds derive from it.
    pub seed: u64,
    pub sponge: SpongeConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            rebalance_every: 10,
            clustering_lookback: 30,
            insample_days: 1500,
            label_threshold: 0.04,
            roundtrip_cost: 0.001,
            seed: 0,
            sponge: SpongeConfig::default(),
        }
    }
}

/// Eligibility lookback: a stock needs both the clustering window and the
/// ten-day feature windows fully quoted.
pub fn universe_lookback(clustering_lookback: usize) -> usize {
    clustering_lookback.max(10)
}

/// Replay the rebalance schedule over the first `insample_days` trading days
/// and label every emitted signal by its holding-period outcome. Only
/// rebalances whose full holding period fits inside the window are used.
pub fn build_insample_dataset(panel: &PricePanel, cfg: &DatasetConfig) -> Result<Vec<LabeledSample>> {
    if cfg.rebalance_every == 0 {
        return Err(Error::Argument("rebalance_every must be positive".into()));
    }
    if panel.n_days() < cfg.insample_days {
        return Err(Error::Argument(format!(
            "panel has {} trading days, the in-sample window needs {}",
            panel.n_days(),
            cfg.insample_days
        )));
    }
    let lookback = universe_lookback(cfg.clustering_lookback);
    let first = lookback;
    if first + cfg.rebalance_every + 1 > cfg.insample_days {
        return Err(Error::Argument(format!(
            "in-sample window of {} days has no room for a {}-day lookback plus a {}-day holding period",
            cfg.insample_days, lookback, cfg.rebalance_every
        )));
    }

    let returns = compute_returns(panel);
    let mut samples = Vec::new();
    let mut t_idx = first;
    while t_idx + cfg.rebalance_every <= cfg.insample_days - 1 {
        let date = panel.calendar().day(t_idx);
        let universe = panel.universe_at(date, lookback)?;
        let scfg = clustering_config_for(&cfg.sponge, cfg.seed, date);
        let snap = snapshot_at(&returns, &universe, date, cfg.clustering_lookback, &scfg)?;
        for (sig, features) in snap.signals.iter().zip(&snap.features) {
            let stock = returns
                .ticker_index(&sig.ticker)
                .ok_or_else(|| Error::Argument(format!("unknown ticker {}", sig.ticker)))?;
            let path = holding_path(&returns, stock, t_idx, cfg.rebalance_every, sig.direction);
            let (label, condition) = label_signal(&path, cfg.label_threshold, cfg.roundtrip_cost);
            samples.push(LabeledSample {
                features: *features,
                label,
                condition,
                ticker: sig.ticker.clone(),
                date,
                direction: sig.direction,
            });
        }
        t_idx += cfg.rebalance_every;
    }
    Ok(samples)
}

/// Write samples as CSV: the nine feature columns, then label, ticker, date,
/// direction. Floats use the shortest exact decimal form.
pub fn write_dataset(samples: &[LabeledSample], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<&str> = FeatureVector::NAMES.to_vec();
    header.extend(["label", "ticker", "date", "direction"]);
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for sample in samples {
        let mut record: Vec<String> = sample
            .features
            .to_array()
            .iter()
            .map(|x| format!("{x}"))
            .collect();
        record.push(format!("{}", sample.label));
        record.push(sample.ticker.clone());
        record.push(sample.date.to_string());
        record.push(sample.direction.to_string());
        w.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read a dataset CSV written by [`write_dataset`].
pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut expected: Vec<&str> = FeatureVector::NAMES.to_vec();
    expected.extend(["label", "ticker", "date", "direction"]);
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: format!("unexpected dataset header {got:?}"),
        });
    }

    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let line = (i + 2) as u64;
        let record = record.map_err(|e| csv_error(path, e))?;
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        if record.len() != expected.len() {
            return Err(parse_err(format!(
                "{} fields, expected {}",
                record.len(),
                expected.len()
            )));
        }
        let mut x = [0.0; 9];
        for (j, slot) in x.iter_mut().enumerate() {
            *slot = record[j]
                .parse::<f64>()
                .map_err(|e| parse_err(format!("bad {}: {e}", FeatureVector::NAMES[j])))?;
        }
        let label: u8 = record[9]
            .parse()
            .map_err(|e| parse_err(format!("bad label: {e}")))?;
        if label > 1 {
            return Err(parse_err(format!("label {label} is not 0/1")));
        }
        let ticker = record[10].to_string();
        let date: NaiveDate = record[11]
            .parse()
            .map_err(|e| parse_err(format!("bad date: {e}")))?;
        let direction: Direction = record[12].parse().map_err(|e| match e {
            Error::Argument(msg) => parse_err(msg),
            other => other,
        })?;
        rows.push(DatasetRow {
            features: FeatureVector::from_array(x),
            label,
            ticker,
            date,
            direction,
        });
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}
