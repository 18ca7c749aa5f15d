//! Synthetic inputs with planted structure, used by tests, benchmarks, and
//! demo runs: signed block graphs for clustering and a block-factor market
//! whose idiosyncratic component mean-reverts.

use chrono::{Datelike, NaiveDate, Weekday};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{PricePanel, TradingCalendar};
use crate::error::{Error, Result};
use crate::graph::SignedGraph;
use crate::seed::stream;

/// Signed adjacency with `n_clusters` contiguous blocks: intra-block weights
/// around `intra`, inter-block around `inter`, Gaussian noise on top, clamped
/// to [-1, 1]. Returns the graph and the planted block of each node.
pub fn planted_signed_graph(
    n: usize,
    n_clusters: usize,
    intra: f64,
    inter: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<(SignedGraph, Vec<usize>)> {
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::Argument(format!(
            "cannot plant {n_clusters} clusters in {n} nodes"
        )));
    }
    let mut rng = stream(seed, "planted-graph");
    let noise = Normal::new(0.0, noise_sigma.max(0.0)).map_err(|e| {
        Error::Argument(format!("bad noise sigma {noise_sigma}: {e}"))
    })?;
    let blocks: Vec<usize> = (0..n).map(|i| i * n_clusters / n).collect();
    let mut adj = Array2::zeros((n, n));
    for i in 0..n {
        adj[(i, i)] = 1.0;
        for j in 0..i {
            let base = if blocks[i] == blocks[j] { intra } else { inter };
            let w = (base + noise.sample(&mut rng)).clamp(-1.0, 1.0);
            adj[(i, j)] = w;
            adj[(j, i)] = w;
        }
    }
    Ok((
        SignedGraph::new((0..n).map(|i| format!("N{i:03}")).collect(), adj)?,
        blocks,
    ))
}

/// Parameters of the planted market generator.
///
/// Daily returns are `beta_g * market + block_noise + delta_idio`, where the
/// idiosyncratic log-deviation follows an AR(1) with coefficient
/// `mean_reversion < 1`: stocks stretched above their block drift back, so
/// below-mean stocks are genuinely worth buying against their cluster.
/// Block loadings alternate in sign, planting negative correlation between
/// adjacent blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedMarket {
    pub n_stocks: usize,
    pub n_days: usize,
    pub n_blocks: usize,
    pub market_vol: f64,
    pub block_vol: f64,
    pub idio_vol: f64,
    /// AR(1) coefficient of the idiosyncratic log-deviation, in [0, 1).
    pub mean_reversion: f64,
    pub seed: u64,
}

impl Default for PlantedMarket {
    fn default() -> Self {
        Self {
            n_stocks: 100,
            n_days: 2000,
            n_blocks: 5,
            market_vol: 0.008,
            block_vol: 0.004,
            idio_vol: 0.010,
            mean_reversion: 0.80,
            seed: 0,
        }
    }
}

fn weekday_calendar(start: NaiveDate, n_days: usize) -> TradingCalendar {
    let mut days = Vec::with_capacity(n_days);
    let mut d = start;
    while days.len() < n_days {
        if d.weekday() != Weekday::Sat && d.weekday() != Weekday::Sun {
            days.push(d);
        }
        d += chrono::Duration::days(1);
    }
    TradingCalendar::new(days).expect("weekday calendar is strictly increasing")
}

/// Generate a complete (no missing prices) panel plus the planted block of
/// each stock.
pub fn planted_panel(cfg: &PlantedMarket) -> Result<(PricePanel, Vec<usize>)> {
    if cfg.n_stocks < 2 || cfg.n_days < 2 {
        return Err(Error::Argument(format!(
            "planted market needs >= 2 stocks and days, got {}x{}",
            cfg.n_stocks, cfg.n_days
        )));
    }
    if cfg.n_blocks == 0 || cfg.n_blocks > cfg.n_stocks {
        return Err(Error::Argument(format!(
            "cannot plant {} blocks in {} stocks",
            cfg.n_blocks, cfg.n_stocks
        )));
    }
    if !(0.0..1.0).contains(&cfg.mean_reversion) {
        return Err(Error::Argument(format!(
            "mean reversion must be in [0, 1), got {}",
            cfg.mean_reversion
        )));
    }

    let mut rng = stream(cfg.seed, "planted-market");
    let n = cfg.n_stocks;
    let d = cfg.n_days;
    let blocks: Vec<usize> = (0..n).map(|i| i * cfg.n_blocks / n).collect();
    let betas: Vec<f64> = (0..cfg.n_blocks)
        .map(|g| if g % 2 == 0 { 1.0 } else { -1.0 })
        .collect();

    let market = Normal::new(0.0, cfg.market_vol).unwrap();
    let block = Normal::new(0.0, cfg.block_vol).unwrap();
    let idio = Normal::new(0.0, cfg.idio_vol).unwrap();

    // stationary start for the AR(1) deviations
    let stationary_sd = cfg.idio_vol / (1.0 - cfg.mean_reversion * cfg.mean_reversion).sqrt();
    let mut x: Vec<f64> = (0..n)
        .map(|_| stationary_sd * rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();

    let mut prices = Array2::zeros((n, d));
    for (s, price) in prices.column_mut(0).iter_mut().enumerate() {
        *price = 20.0 + 2.0 * (s % 40) as f64;
    }
    for t in 1..d {
        let m = market.sample(&mut rng);
        let block_shocks: Vec<f64> = (0..cfg.n_blocks).map(|_| block.sample(&mut rng)).collect();
        for s in 0..n {
            let g = blocks[s];
            let x_next = cfg.mean_reversion * x[s] + idio.sample(&mut rng);
            let r = (betas[g] * m + block_shocks[g] + (x_next - x[s])).clamp(-0.5, 0.5);
            x[s] = x_next;
            prices[(s, t)] = prices[(s, t - 1)] * (1.0 + r);
        }
    }

    let calendar = weekday_calendar(NaiveDate::from_ymd_opt(2015, 1, 5).unwrap(), d);
    let tickers = (0..n).map(|s| format!("S{s:03}")).collect();
    let panel = PricePanel::new(calendar, tickers, prices)?;
    Ok((panel, blocks))
}
