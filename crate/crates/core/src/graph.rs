//! Rolling correlation graphs over return windows, their positive/negative
//! split, and symmetric normalized Laplacians.

use chrono::NaiveDate;
use ndarray::{Array1, Array2};

use crate::data::ReturnsPanel;
use crate::error::{Error, Result};

/// Signed, symmetric adjacency of pairwise return correlations.
/// Diagonal is exactly 1; every weight lies in [-1, 1].
#[derive(Debug, Clone)]
pub struct SignedGraph {
    tickers: Vec<String>,
    adjacency: Array2<f64>,
}

impl SignedGraph {
    pub fn new(tickers: Vec<String>, adjacency: Array2<f64>) -> Result<Self> {
        let n = tickers.len();
        if n < 2 {
            return Err(Error::Argument(format!(
                "signed graph needs at least two nodes, got {n}"
            )));
        }
        if adjacency.dim() != (n, n) {
            return Err(Error::Argument(format!(
                "adjacency is {:?}, expected {n}x{n}",
                adjacency.dim()
            )));
        }
        for i in 0..n {
            if (adjacency[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::Argument(format!(
                    "adjacency diagonal must be 1, got {} at {i}",
                    adjacency[(i, i)]
                )));
            }
            for j in 0..n {
                let w = adjacency[(i, j)];
                if !w.is_finite() || w.abs() > 1.0 + 1e-12 {
                    return Err(Error::Argument(format!(
                        "correlation weight {w} out of range at ({i},{j})"
                    )));
                }
                if (w - adjacency[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Argument(format!("adjacency not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { tickers, adjacency })
    }

    pub fn n(&self) -> usize {
        self.tickers.len()
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }
}

/// Pearson correlation of two equal-length windows; `None` when either side
/// has zero variance.
fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Correlation graph over the `b` returns ending at trading day `t` for the
/// given tickers. Tickers whose window has zero variance (or any missing
/// return) cannot be correlated and are dropped; they come back in the
/// second element so callers can log them.
pub fn correlation_graph(
    returns: &ReturnsPanel,
    tickers: &[String],
    t: NaiveDate,
    b: usize,
) -> Result<(SignedGraph, Vec<String>)> {
    if b < 2 {
        return Err(Error::Argument(format!("correlation window b={b} must be >= 2")));
    }
    let j = returns
        .dates()
        .iter()
        .position(|&d| d == t)
        .ok_or_else(|| Error::Argument(format!("{t} has no realized return in the panel")))?;
    let ti = j + 1; // price-day index

    let mut kept: Vec<(String, Vec<f64>)> = Vec::new();
    let mut dropped = Vec::new();
    for name in tickers {
        let s = returns
            .ticker_index(name)
            .ok_or_else(|| Error::Argument(format!("unknown ticker {name}")))?;
        let window = returns.window_ending_at(s, ti, b)?;
        let w: Vec<f64> = window.iter().cloned().collect();
        let has_gap = w.iter().any(|x| x.is_nan());
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let zero_var = w.iter().all(|&x| x == mean);
        if has_gap || zero_var {
            dropped.push(name.clone());
        } else {
            kept.push((name.clone(), w));
        }
    }
    if kept.len() < 2 {
        return Err(Error::Validation(format!(
            "fewer than two correlatable tickers at {t} (dropped {})",
            dropped.len()
        )));
    }

    let n = kept.len();
    let mut adjacency = Array2::zeros((n, n));
    for i in 0..n {
        adjacency[(i, i)] = 1.0;
        for k in (i + 1)..n {
            // zero-variance windows are already gone, so correlation exists
            let r = pearson(&kept[i].1, &kept[k].1).expect("variance checked above");
            adjacency[(i, k)] = r;
            adjacency[(k, i)] = r;
        }
    }
    let names = kept.into_iter().map(|(name, _)| name).collect();
    Ok((SignedGraph::new(names, adjacency)?, dropped))
}

/// Nonnegative positive/negative parts of a signed adjacency, self-loops
/// excluded, with their degree vectors.
#[derive(Debug, Clone)]
pub struct SignSplit {
    pub a_plus: Array2<f64>,
    pub a_minus: Array2<f64>,
    pub d_plus: Array1<f64>,
    pub d_minus: Array1<f64>,
}

pub fn sign_split(graph: &SignedGraph) -> SignSplit {
    let n = graph.n();
    let a = graph.adjacency();
    let mut a_plus = Array2::zeros((n, n));
    let mut a_minus = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = a[(i, j)];
            if w > 0.0 {
                a_plus[(i, j)] = w;
            } else if w < 0.0 {
                a_minus[(i, j)] = -w;
            }
        }
    }
    let d_plus = a_plus.sum_axis(ndarray::Axis(1));
    let d_minus = a_minus.sum_axis(ndarray::Axis(1));
    SignSplit {
        a_plus,
        a_minus,
        d_plus,
        d_minus,
    }
}

/// Orientation of the Laplacian. `DegreeMinusAdjacency` is the standard
/// positive-semidefinite form used by the clustering pipeline; the negated
/// form exists so the alternative printed orientation can be exercised
/// explicitly rather than silently rewritten.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum LaplacianConvention {
    #[default]
    DegreeMinusAdjacency,
    AdjacencyMinusDegree,
}

fn normalized_laplacian(
    a: &Array2<f64>,
    d: &Array1<f64>,
    convention: LaplacianConvention,
) -> Array2<f64> {
    let n = d.len();
    // pseudo-inverse convention: zero-degree nodes contribute zero rows/cols
    let d_inv_sqrt: Array1<f64> = d.mapv(|x| if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 });
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let unnorm = if i == j { d[i] - a[(i, j)] } else { -a[(i, j)] };
            l[(i, j)] = d_inv_sqrt[i] * d_inv_sqrt[j] * unnorm;
        }
    }
    match convention {
        LaplacianConvention::DegreeMinusAdjacency => l,
        LaplacianConvention::AdjacencyMinusDegree => -l,
    }
}

/// Symmetric normalized Laplacians of the positive and negative parts.
pub fn sym_laplacians_with(
    split: &SignSplit,
    convention: LaplacianConvention,
) -> (Array2<f64>, Array2<f64>) {
    (
        normalized_laplacian(&split.a_plus, &split.d_plus, convention),
        normalized_laplacian(&split.a_minus, &split.d_minus, convention),
    )
}

/// Standard-orientation symmetric normalized Laplacians.
pub fn sym_laplacians(split: &SignSplit) -> (Array2<f64>, Array2<f64>) {
    sym_laplacians_with(split, LaplacianConvention::DegreeMinusAdjacency)
}
