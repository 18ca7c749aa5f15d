//! Signed-graph clustering: spectral embedding of the positive/negative
//! Laplacian pencil plus seeded k-means++.
//!
//! The embedding solves `(L+_sym + tau_minus I) v = lambda (L-_sym + tau_plus I) v`
//! and keeps the eigenvectors of the k smallest eigenvalues; k itself comes
//! from an explained-variance rule on the correlation matrix spectrum.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{sign_split, sym_laplacians_with, LaplacianConvention, SignedGraph};
use crate::linalg::{frobenius_norm, generalized_symmetric_eig};
use crate::seed::stream;

/// Relative residual bound enforced on every returned eigenpair.
pub const EIG_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpongeConfig {
    pub tau_plus: f64,
    pub tau_minus: f64,
    /// Fraction of (nonnegative-clamped) spectrum mass the top k eigenvalues
    /// must explain.
    pub variance_fraction: f64,
    /// When set, bypasses the explained-variance rule and clusters with
    /// exactly this k. The variance rule is a heuristic tuned to empirical
    /// correlation matrices; planted-structure studies know their k.
    pub fixed_k: Option<usize>,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub seed: u64,
    pub laplacian: LaplacianConvention,
}

impl Default for SpongeConfig {
    fn default() -> Self {
        Self {
            tau_plus: 1.0,
            tau_minus: 1.0,
            variance_fraction: 0.9,
            fixed_k: None,
            kmeans_restarts: 10,
            kmeans_max_iter: 300,
            kmeans_tol: 1e-9,
            seed: 0,
            laplacian: LaplacianConvention::default(),
        }
    }
}

/// Cluster labels for the nodes of one graph; ids are `0..k` and every id is
/// used by at least one node.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    tickers: Vec<String>,
    labels: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    pub fn new(tickers: Vec<String>, labels: Vec<usize>, k: usize) -> Result<Self> {
        if tickers.len() != labels.len() {
            return Err(Error::Argument(format!(
                "{} tickers vs {} labels",
                tickers.len(),
                labels.len()
            )));
        }
        let mut seen = vec![false; k];
        for &l in &labels {
            if l >= k {
                return Err(Error::Argument(format!("label {l} out of range for k={k}")));
            }
            seen[l] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::Argument("empty cluster id".into()));
        }
        Ok(Self { tickers, labels, k })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Member node indices per cluster id.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (node, &label) in self.labels.iter().enumerate() {
            out[label].push(node);
        }
        out
    }
}

/// Smallest number of leading eigenvalues of the correlation matrix that
/// explain `variance_fraction` of its nonnegative spectrum mass (negative
/// eigenvalues clamp to zero).
pub fn select_k(graph: &SignedGraph, variance_fraction: f64) -> Result<usize> {
    if !(variance_fraction > 0.0 && variance_fraction <= 1.0) {
        return Err(Error::Argument(format!(
            "variance fraction must be in (0, 1], got {variance_fraction}"
        )));
    }
    let (vals, _) = crate::linalg::symmetric_eig(graph.adjacency())?;
    let mut clamped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    clamped.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total: f64 = clamped.iter().sum();
    debug_assert!(total > 0.0, "trace of a correlation matrix is positive");
    let mut cum = 0.0;
    for (m, &v) in clamped.iter().enumerate() {
        cum += v;
        if cum / total >= variance_fraction {
            return Ok(m + 1);
        }
    }
    Ok(clamped.len())
}

/// Eigenvalues and M2-orthonormal eigenvectors of the k smallest generalized
/// eigenpairs of `M1 v = lambda M2 v` (`M2` positive definite), residual-
/// checked against `EIG_RESIDUAL_TOL * ||M1||_F`.
pub fn generalized_eigpairs(
    m1: &Array2<f64>,
    m2: &Array2<f64>,
    k: usize,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = m1.nrows();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("k={k} out of range for n={n}")));
    }
    let (vals, vecs) = generalized_symmetric_eig(m1, m2)?;
    let scale = frobenius_norm(m1).max(f64::MIN_POSITIVE);
    for j in 0..k {
        let v = vecs.column(j);
        let lhs = m1.dot(&v);
        let rhs = m2.dot(&v);
        let mut resid = 0.0;
        for i in 0..n {
            let r = lhs[i] - vals[j] * rhs[i];
            resid += r * r;
        }
        if resid.sqrt() > EIG_RESIDUAL_TOL * scale {
            return Err(Error::Numeric(format!(
                "eigenpair {j} residual {} exceeds {} * ||M1||",
                resid.sqrt(),
                EIG_RESIDUAL_TOL
            )));
        }
    }
    Ok((
        vals.slice(ndarray::s![..k]).to_owned(),
        vecs.slice(ndarray::s![.., ..k]).to_owned(),
    ))
}

/// Embedding columns for the k smallest generalized eigenpairs.
pub fn generalized_eigvecs(m1: &Array2<f64>, m2: &Array2<f64>, k: usize) -> Result<Array2<f64>> {
    generalized_eigpairs(m1, m2, k).map(|(_, vecs)| vecs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 300,
            tol: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    /// Sum of squared distances of points to their centroid.
    pub inertia: f64,
    /// Which restart won (lowest inertia, lowest index on ties).
    pub restart: usize,
}

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn assign_labels(points: &Array2<f64>, centroids: &Array2<f64>) -> Vec<usize> {
    let n = points.nrows();
    let k = centroids.nrows();
    let mut labels = vec![0usize; n];
    for p in 0..n {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let d = sq_dist(points.row(p), centroids.row(c));
            // strict <: ties stay with the lowest cluster index
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        labels[p] = best;
    }
    labels
}

fn plus_plus_init(points: &Array2<f64>, k: usize, rng: &mut impl Rng) -> Array2<f64> {
    let n = points.nrows();
    let d = points.ncols();
    let mut centroids = Array2::zeros((k, d));
    let mut chosen = vec![false; n];

    let first = rng.gen_range(0..n);
    centroids.row_mut(0).assign(&points.row(first));
    chosen[first] = true;

    let mut dist2: Vec<f64> = (0..n)
        .map(|p| sq_dist(points.row(p), centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = dist2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (p, &w) in dist2.iter().enumerate() {
                acc += w;
                if target < acc {
                    pick = p;
                    break;
                }
            }
            pick
        } else {
            // all remaining points coincide with a centroid: take the lowest
            // index not yet used so the init stays deterministic
            (0..n).find(|&p| !chosen[p]).unwrap_or(0)
        };
        chosen[pick] = true;
        centroids.row_mut(c).assign(&points.row(pick));
        for p in 0..n {
            let dn = sq_dist(points.row(p), centroids.row(c));
            if dn < dist2[p] {
                dist2[p] = dn;
            }
        }
    }
    centroids
}

fn lloyd(points: &Array2<f64>, k: usize, opts: &KMeansOptions, restart: usize) -> KMeansFit {
    let n = points.nrows();
    let d = points.ncols();
    let mut rng = stream(opts.seed, &format!("kmeans:{restart}"));
    let mut centroids = plus_plus_init(points, k, &mut rng);

    for _ in 0..opts.max_iter {
        let labels = assign_labels(points, &centroids);
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (p, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            let row = points.row(p);
            for j in 0..d {
                sums[(l, j)] += row[j];
            }
        }
        let mut new_centroids = Array2::zeros((k, d));
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    new_centroids[(c, j)] = sums[(c, j)] / counts[c] as f64;
                }
            } else {
                new_centroids.row_mut(c).assign(&centroids.row(c));
            }
        }
        // re-seed empty clusters onto the farthest point from its centroid
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut far = 0usize;
            let mut far_d = -1.0;
            for p in 0..n {
                if taken[p] {
                    continue;
                }
                let dd = sq_dist(points.row(p), new_centroids.row(labels[p]));
                if dd > far_d {
                    far_d = dd;
                    far = p;
                }
            }
            taken[far] = true;
            new_centroids.row_mut(c).assign(&points.row(far));
        }

        let shift = (0..k)
            .map(|c| sq_dist(centroids.row(c), new_centroids.row(c)).sqrt())
            .fold(0.0, f64::max);
        centroids = new_centroids;
        if shift < opts.tol {
            break;
        }
    }

    let mut labels = assign_labels(points, &centroids);
    // degenerate duplicate inputs can still leave an id unused; hand those ids
    // the farthest points so every cluster is nonempty
    let mut counts = vec![0usize; k];
    for &l in &labels {
        counts[l] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let mut far = 0usize;
        let mut far_d = -1.0;
        for p in 0..n {
            if counts[labels[p]] <= 1 {
                continue; // do not empty another cluster
            }
            let dd = sq_dist(points.row(p), centroids.row(labels[p]));
            if dd > far_d {
                far_d = dd;
                far = p;
            }
        }
        counts[labels[far]] -= 1;
        labels[far] = c;
        counts[c] = 1;
        centroids.row_mut(c).assign(&points.row(far));
    }

    let inertia = labels
        .iter()
        .enumerate()
        .map(|(p, &l)| sq_dist(points.row(p), centroids.row(l)))
        .sum();
    KMeansFit {
        labels,
        centroids,
        inertia,
        restart,
    }
}

/// Seeded k-means++ with Lloyd iterations and restarts; the restart with the
/// lowest within-cluster sum of squares wins, lowest restart index on ties.
pub fn kmeans_pp(points: &Array2<f64>, k: usize, opts: &KMeansOptions) -> Result<KMeansFit> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("k={k} out of range for {n} points")));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("k-means input contains non-finite values".into()));
    }
    if opts.restarts == 0 {
        return Err(Error::Argument("k-means needs at least one restart".into()));
    }
    let mut best: Option<KMeansFit> = None;
    for r in 0..opts.restarts {
        let fit = lloyd(points, k, opts, r);
        let better = match &best {
            None => true,
            Some(b) => fit.inertia < b.inertia, // strict: earliest restart wins ties
        };
        if better {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Full clustering pass on one signed graph.
pub fn sponge_sym(graph: &SignedGraph, cfg: &SpongeConfig) -> Result<ClusterAssignment> {
    let n = graph.n();
    let k = match cfg.fixed_k {
        Some(k) if k == 0 || k > n => {
            return Err(Error::Argument(format!("fixed_k={k} out of range for n={n}")))
        }
        Some(k) => k,
        None => select_k(graph, cfg.variance_fraction)?,
    };
    let split = sign_split(graph);
    let (l_plus, l_minus) = sym_laplacians_with(&split, cfg.laplacian);
    let eye = Array2::<f64>::eye(n);
    let m1 = &l_plus + &(&eye * cfg.tau_minus);
    let m2 = &l_minus + &(&eye * cfg.tau_plus);
    let embedding = generalized_eigvecs(&m1, &m2, k)?;
    let opts = KMeansOptions {
        restarts: cfg.kmeans_restarts,
        max_iter: cfg.kmeans_max_iter,
        tol: cfg.kmeans_tol,
        seed: cfg.seed,
    };
    let fit = kmeans_pp(&embedding, k, &opts)?;
    ClusterAssignment::new(graph.tickers().to_vec(), fit.labels, k)
}

/// Adjusted Rand index between two labelings of the same nodes.
/// 1.0 means identical partitions up to renaming; independent labelings
/// score near 0.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "label vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Argument("empty labelings".into()));
    }
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let choose2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let mut sum_ij = 0.0;
    let mut row = vec![0u64; ka];
    let mut col = vec![0u64; kb];
    for i in 0..ka {
        for j in 0..kb {
            sum_ij += choose2(table[i][j]);
            row[i] += table[i][j];
            col[j] += table[i][j];
        }
    }
    let sum_a: f64 = row.iter().map(|&x| choose2(x)).sum();
    let sum_b: f64 = col.iter().map(|&x| choose2(x)).sum();
    let total = choose2(a.len() as u64);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-15 {
        // both partitions trivial (all singletons or one block): identical => 1
        return Ok(if sum_ij == max_index { 1.0 } else { 0.0 });
    }
    Ok((sum_ij - expected) / (max_index - expected))
}
