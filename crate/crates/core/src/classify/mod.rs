//! Probability classifiers over signal features: min-max scaling, an 80/20
//! split, five model families trained from scratch, grid-search
//! cross-validation under Brier loss, and model (de)serialization.
//!
//! Every stochastic routine takes an explicit seed and derives named
//! sub-streams from it; training the same spec on the same data with the
//! same seed reproduces the model bit for bit.

mod boost;
mod linear;
mod mlp;

pub use boost::{AdaBoostModel, HistGbModel, Stump, TreeNode};
pub use mlp::MlpModel;

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::stream;
use crate::signal::DatasetRow;

// ---------------------------------------------------------------------------
// scaling

/// Per-feature min/max learned on the training fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Clamp transformed values into [0, 1]. Off by default: values outside
    /// the training range extrapolate linearly.
    pub clip: bool,
}

/// Learn per-feature ranges. Fit this on the training fraction only.
pub fn minmax_fit(x: ArrayView2<'_, f64>) -> Result<ScalerParams> {
    if x.nrows() == 0 {
        return Err(Error::Argument("cannot fit a scaler on zero rows".into()));
    }
    check_finite(x)?;
    let mut min = vec![f64::INFINITY; x.ncols()];
    let mut max = vec![f64::NEG_INFINITY; x.ncols()];
    for row in x.rows() {
        for (j, &v) in row.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(ScalerParams {
        min,
        max,
        clip: false,
    })
}

fn scale_value(v: f64, min: f64, max: f64, clip: bool) -> f64 {
    let scaled = if max == min {
        0.0
    } else {
        (v - min) / (max - min)
    };
    if clip {
        scaled.clamp(0.0, 1.0)
    } else {
        scaled
    }
}

/// Apply `(x - min) / (max - min)` columnwise; constant features map to 0.
pub fn minmax_apply(x: ArrayView2<'_, f64>, p: &ScalerParams) -> Result<Array2<f64>> {
    if x.ncols() != p.min.len() {
        return Err(Error::Argument(format!(
            "{} features, scaler fitted on {}",
            x.ncols(),
            p.min.len()
        )));
    }
    let mut out = x.to_owned();
    for mut row in out.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = scale_value(*v, p.min[j], p.max[j], p.clip);
        }
    }
    Ok(out)
}

/// Scale a single feature vector.
pub fn minmax_apply_row(x: ArrayView1<'_, f64>, p: &ScalerParams) -> Result<Array1<f64>> {
    if x.len() != p.min.len() {
        return Err(Error::Argument(format!(
            "{} features, scaler fitted on {}",
            x.len(),
            p.min.len()
        )));
    }
    Ok(Array1::from_iter(x.iter().enumerate().map(|(j, &v)| {
        scale_value(v, p.min[j], p.max[j], p.clip)
    })))
}

/// Undo the scaling (identity for constant features, which scaled to 0).
pub fn minmax_inverse(x: ArrayView2<'_, f64>, p: &ScalerParams) -> Result<Array2<f64>> {
    if x.ncols() != p.min.len() {
        return Err(Error::Argument(format!(
            "{} features, scaler fitted on {}",
            x.ncols(),
            p.min.len()
        )));
    }
    let mut out = x.to_owned();
    for mut row in out.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if p.max[j] == p.min[j] {
                p.min[j]
            } else {
                p.min[j] + *v * (p.max[j] - p.min[j])
            };
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// dataset plumbing

/// Feature matrix and label vector from dataset rows.
pub fn dataset_matrix(rows: &[DatasetRow]) -> (Array2<f64>, Vec<u8>) {
    let mut x = Array2::zeros((rows.len(), 9));
    let mut y = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let values = row.features.to_array();
        for (j, v) in values.iter().enumerate() {
            x[(i, j)] = *v;
        }
        y.push(row.label);
    }
    (x, y)
}

/// Deterministic random split of `0..n` into train/validation index sets of
/// sizes `floor(fraction * n)` and the rest. Both halves come back sorted.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream(seed, "split");
    order.shuffle(&mut rng);
    let n_train = (fraction.clamp(0.0, 1.0) * n as f64).floor() as usize;
    let mut train = order[..n_train].to_vec();
    let mut validation = order[n_train..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    (train, validation)
}

// ---------------------------------------------------------------------------
// metrics

/// Mean squared distance between predicted probabilities and labels.
pub fn brier_score(probs: &[f64], labels: &[u8]) -> Result<f64> {
    if probs.is_empty() || probs.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} probabilities vs {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let sum: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| (p - y as f64).powi(2))
        .sum();
    Ok(sum / probs.len() as f64)
}

/// TP / (TP + FP) with positives predicted strictly above `cutoff`. Errors
/// when nothing is predicted positive (the ratio is undefined).
pub fn precision_score(probs: &[f64], labels: &[u8], cutoff: f64) -> Result<f64> {
    if probs.is_empty() || probs.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} probabilities vs {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    for (&p, &y) in probs.iter().zip(labels) {
        if p > cutoff {
            if y == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    if tp + fp == 0 {
        return Err(Error::Numeric(
            "precision is undefined: no positive predictions".into(),
        ));
    }
    Ok(tp as f64 / (tp + fp) as f64)
}

// ---------------------------------------------------------------------------
// hyperparameter specs

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    L2,
    L1,
    Elasticnet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogisticSolver {
    Lbfgs,
    Liblinear,
    NewtonCholesky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeight {
    Balanced,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub c: f64,
    pub penalty: Penalty,
    pub solver: LogisticSolver,
    pub max_iter: usize,
    pub class_weight: ClassWeight,
    /// Compatibility flag; every fit starts fresh.
    pub warm_start: bool,
    /// Gradient-norm convergence tolerance.
    pub tol: f64,
    /// L1 share for the elasticnet penalty.
    pub l1_ratio: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            penalty: Penalty::L2,
            solver: LogisticSolver::Lbfgs,
            max_iter: 100,
            class_weight: ClassWeight::None,
            warm_start: false,
            tol: 1e-6,
            l1_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgdLoss {
    ModifiedHuber,
    LogLoss,
    Hinge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgdSchedule {
    Constant,
    Optimal,
    Adaptive,
    Invscaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdParams {
    pub loss: SgdLoss,
    pub penalty: Penalty,
    pub alpha: f64,
    pub max_iter: usize,
    pub early_stopping: bool,
    pub learning_rate: SgdSchedule,
    /// Compatibility flag; every fit starts fresh.
    pub warm_start: bool,
    /// Initial step size for the constant/adaptive/invscaling schedules.
    pub eta0: f64,
    /// Plateau tolerance for stopping and for the adaptive schedule.
    pub tol: f64,
    /// Epochs without improvement before stopping / decaying.
    pub n_iter_no_change: usize,
    /// L1 share for the elasticnet penalty.
    pub l1_ratio: f64,
    /// Held-out share when `early_stopping` is on.
    pub validation_fraction: f64,
}

impl Default for SgdParams {
    fn default() -> Self {
        Self {
            loss: SgdLoss::ModifiedHuber,
            penalty: Penalty::L2,
            alpha: 1e-4,
            max_iter: 1000,
            early_stopping: false,
            learning_rate: SgdSchedule::Optimal,
            warm_start: false,
            eta0: 0.01,
            tol: 1e-3,
            n_iter_no_change: 5,
            l1_ratio: 0.15,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlpSchedule {
    Constant,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlpSolver {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden_layer_sizes: Vec<usize>,
    pub activation: Activation,
    /// L2 penalty on the weights.
    pub alpha: f64,
    /// Step-size schedule; only the sgd solver consults it.
    pub learning_rate: MlpSchedule,
    pub batch_size: usize,
    pub solver: MlpSolver,
    pub learning_rate_init: f64,
    pub max_epochs: usize,
    /// Training-loss plateau tolerance for early stopping.
    pub tol: f64,
    /// Epochs without improvement before stopping (or decaying, when the
    /// schedule is adaptive).
    pub n_iter_no_change: usize,
    /// Momentum for the sgd solver (Nesterov style).
    pub momentum: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden_layer_sizes: vec![64, 64],
            activation: Activation::Relu,
            alpha: 1e-6,
            learning_rate: MlpSchedule::Constant,
            batch_size: 200,
            solver: MlpSolver::Adam,
            learning_rate_init: 1e-3,
            max_epochs: 500,
            tol: 1e-6,
            n_iter_no_change: 10,
            momentum: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            learning_rate: 0.001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EarlyStopping {
    /// On only when the training set is large (> 10k samples).
    Auto,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistGbParams {
    pub learning_rate: f64,
    pub early_stopping: EarlyStopping,
    pub max_iter: usize,
    /// Compatibility flag; every fit starts fresh.
    pub warm_start: bool,
    pub max_bins: usize,
    pub max_leaf_nodes: usize,
    pub min_samples_leaf: usize,
    pub l2_regularization: f64,
    pub n_iter_no_change: usize,
    pub tol: f64,
    pub validation_fraction: f64,
}

impl Default for HistGbParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            early_stopping: EarlyStopping::Auto,
            max_iter: 100,
            warm_start: false,
            max_bins: 255,
            max_leaf_nodes: 31,
            min_samples_leaf: 20,
            l2_regularization: 0.0,
            n_iter_no_change: 10,
            tol: 1e-7,
            validation_fraction: 0.1,
        }
    }
}

/// One fully specified model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Logistic(LogisticParams),
    SgdLinear(SgdParams),
    Mlp(MlpParams),
    Adaboost(AdaBoostParams),
    Histgb(HistGbParams),
}

impl ClassifierSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            ClassifierSpec::Logistic(_) => "logistic",
            ClassifierSpec::SgdLinear(_) => "sgd_linear",
            ClassifierSpec::Mlp(_) => "mlp",
            ClassifierSpec::Adaboost(_) => "adaboost",
            ClassifierSpec::Histgb(_) => "histgb",
        }
    }
}

// ---------------------------------------------------------------------------
// hyperparameter grids

/// A per-family hyperparameter grid; each field lists the values searched.
/// Expansion is the Cartesian product in field order, first field slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GridSpec {
    Logistic {
        c: Vec<f64>,
        penalty: Vec<Penalty>,
        solver: Vec<LogisticSolver>,
        max_iter: Vec<usize>,
        class_weight: Vec<ClassWeight>,
        warm_start: Vec<bool>,
    },
    SgdLinear {
        loss: Vec<SgdLoss>,
        penalty: Vec<Penalty>,
        alpha: Vec<f64>,
        max_iter: Vec<usize>,
        early_stopping: Vec<bool>,
        learning_rate: Vec<SgdSchedule>,
        warm_start: Vec<bool>,
    },
    Mlp {
        hidden_layer_sizes: Vec<Vec<usize>>,
        activation: Vec<Activation>,
        alpha: Vec<f64>,
        learning_rate: Vec<MlpSchedule>,
        batch_size: Vec<usize>,
        solver: Vec<MlpSolver>,
    },
    Adaboost {
        n_estimators: Vec<usize>,
        learning_rate: Vec<f64>,
    },
    Histgb {
        learning_rate: Vec<f64>,
        early_stopping: Vec<EarlyStopping>,
        max_iter: Vec<usize>,
        warm_start: Vec<bool>,
    },
}

impl GridSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            GridSpec::Logistic { .. } => "logistic",
            GridSpec::SgdLinear { .. } => "sgd_linear",
            GridSpec::Mlp { .. } => "mlp",
            GridSpec::Adaboost { .. } => "adaboost",
            GridSpec::Histgb { .. } => "histgb",
        }
    }

    /// Expand into concrete specs; unlisted knobs keep their defaults.
    pub fn expand(&self) -> Vec<ClassifierSpec> {
        let mut out = Vec::new();
        match self {
            GridSpec::Logistic {
                c,
                penalty,
                solver,
                max_iter,
                class_weight,
                warm_start,
            } => {
                for &cv in c {
                    for &p in penalty {
                        for &s in solver {
                            for &mi in max_iter {
                                for &cw in class_weight {
                                    for &ws in warm_start {
                                        out.push(ClassifierSpec::Logistic(LogisticParams {
                                            c: cv,
                                            penalty: p,
                                            solver: s,
                                            max_iter: mi,
                                            class_weight: cw,
                                            warm_start: ws,
                                            ..LogisticParams::default()
                                        }));
                                    }
                                }
                            }
                        }
                    }
                }
            }
            GridSpec::SgdLinear {
                loss,
                penalty,
                alpha,
                max_iter,
                early_stopping,
                learning_rate,
                warm_start,
            } => {
                for &l in loss {
                    for &p in penalty {
                        for &a in alpha {
                            for &mi in max_iter {
                                for &es in early_stopping {
                                    for &lr in learning_rate {
                                        for &ws in warm_start {
                                            out.push(ClassifierSpec::SgdLinear(SgdParams {
                                                loss: l,
                                                penalty: p,
                                                alpha: a,
                                                max_iter: mi,
                                                early_stopping: es,
                                                learning_rate: lr,
                                                warm_start: ws,
                                                ..SgdParams::default()
                                            }));
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            GridSpec::Mlp {
                hidden_layer_sizes,
                activation,
                alpha,
                learning_rate,
                batch_size,
                solver,
            } => {
                for h in hidden_layer_sizes {
                    for &act in activation {
                        for &a in alpha {
                            for &lr in learning_rate {
                                for &bs in batch_size {
                                    for &s in solver {
                                        out.push(ClassifierSpec::Mlp(MlpParams {
                                            hidden_layer_sizes: h.clone(),
                                            activation: act,
                                            alpha: a,
                                            learning_rate: lr,
                                            batch_size: bs,
                                            solver: s,
                                            ..MlpParams::default()
                                        }));
                                    }
                                }
                            }
                        }
                    }
                }
            }
            GridSpec::Adaboost {
                n_estimators,
                learning_rate,
            } => {
                for &n in n_estimators {
                    for &lr in learning_rate {
                        out.push(ClassifierSpec::Adaboost(AdaBoostParams {
                            n_estimators: n,
                            learning_rate: lr,
                        }));
                    }
                }
            }
            GridSpec::Histgb {
                learning_rate,
                early_stopping,
                max_iter,
                warm_start,
            } => {
                for &lr in learning_rate {
                    for &es in early_stopping {
                        for &mi in max_iter {
                            for &ws in warm_start {
                                out.push(ClassifierSpec::Histgb(HistGbParams {
                                    learning_rate: lr,
                                    early_stopping: es,
                                    max_iter: mi,
                                    warm_start: ws,
                                    ..HistGbParams::default()
                                }));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Read a grid data file (JSON `GridSpec`) and expand it.
pub fn load_grid(path: &Path) -> Result<Vec<ClassifierSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let grid: GridSpec = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    Ok(grid.expand())
}

// ---------------------------------------------------------------------------
// trained models

/// Fitted parameters, one variant per family plus the degenerate prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    /// Degenerate model: the training labels were single-class (or no weak
    /// learner could be fitted), so every prediction is the class-1 prior.
    Prior { p: f64 },
    Linear(LinearModel),
    Mlp(MlpModel),
    Adaboost(AdaBoostModel),
    Histgb(HistGbModel),
}

/// How a linear raw score becomes a probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilityLink {
    /// Logistic function of the score.
    Sigmoid,
    /// `(clamp(score, -1, 1) + 1) / 2`, for margin-based losses.
    ClippedMargin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub link: ProbabilityLink,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LinearModel {
    pub fn score(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.weights
            .iter()
            .zip(x.iter())
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.bias
    }

    pub fn proba(&self, x: ArrayView1<'_, f64>) -> f64 {
        let f = self.score(x);
        match self.link {
            ProbabilityLink::Sigmoid => sigmoid(f),
            ProbabilityLink::ClippedMargin => (f.clamp(-1.0, 1.0) + 1.0) / 2.0,
        }
    }
}

/// A trained classifier: the spec it came from, the training seed, and the
/// fitted parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub seed: u64,
    pub params: ModelParams,
}

impl TrainedModel {
    /// True when training fell back to the class prior.
    pub fn is_degenerate(&self) -> bool {
        matches!(self.params, ModelParams::Prior { .. })
    }

    /// Probability that the signal is profitable, for one scaled feature
    /// vector. Errors on non-finite input or a feature-count mismatch.
    pub fn predict_proba(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite feature in input".into()));
        }
        let p = match &self.params {
            ModelParams::Prior { p } => *p,
            ModelParams::Linear(m) => {
                check_width(x.len(), m.weights.len())?;
                m.proba(x)
            }
            ModelParams::Mlp(m) => m.proba(x)?,
            ModelParams::Adaboost(m) => m.proba(x),
            ModelParams::Histgb(m) => m.proba(x),
        };
        debug_assert!((0.0..=1.0).contains(&p));
        Ok(p)
    }

    pub fn predict_proba_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        x.rows().into_iter().map(|r| self.predict_proba(r)).collect()
    }
}

fn check_width(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Argument(format!(
            "{got} features, model fitted on {expected}"
        )));
    }
    Ok(())
}

fn check_finite(x: ArrayView2<'_, f64>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(
            "non-finite feature in training matrix".into(),
        ));
    }
    Ok(())
}

/// Fit one spec on scaled features. Labels must be 0/1; a single-class label
/// vector yields the degenerate prior model.
pub fn train(spec: &ClassifierSpec, x: ArrayView2<'_, f64>, y: &[u8], seed: u64) -> Result<TrainedModel> {
    if x.nrows() == 0 || x.nrows() != y.len() {
        return Err(Error::Argument(format!(
            "{} rows vs {} labels",
            x.nrows(),
            y.len()
        )));
    }
    check_finite(x)?;
    if let Some(&bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::Validation(format!("label {bad} is not 0/1")));
    }
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    let params = if n_pos == 0 || n_pos == y.len() {
        ModelParams::Prior {
            p: n_pos as f64 / y.len() as f64,
        }
    } else {
        match spec {
            ClassifierSpec::Logistic(p) => linear::fit_logistic(p, x, y)?,
            ClassifierSpec::SgdLinear(p) => linear::fit_sgd(p, x, y, seed)?,
            ClassifierSpec::Mlp(p) => mlp::fit_mlp(p, x, y, seed)?,
            ClassifierSpec::Adaboost(p) => boost::fit_adaboost(p, x, y),
            ClassifierSpec::Histgb(p) => boost::fit_histgb(p, x, y, seed)?,
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        seed,
        params,
    })
}

// ---------------------------------------------------------------------------
// grid-search cross-validation

/// Outcome of a grid search: the winning spec and every spec's mean
/// validation Brier score.
#[derive(Debug, Clone, PartialEq)]
pub struct CVResult {
    pub best_index: usize,
    pub best_spec: ClassifierSpec,
    pub mean_brier: Vec<f64>,
    pub folds: usize,
}

/// Evaluate every spec by k-fold cross-validation under Brier loss and pick
/// the minimum; ties go to the earliest spec in grid order. The fold
/// partition is a seeded shuffle cut into balanced contiguous chunks.
pub fn grid_search_cv(
    specs: &[ClassifierSpec],
    x: ArrayView2<'_, f64>,
    y: &[u8],
    folds: usize,
    seed: u64,
) -> Result<CVResult> {
    if specs.is_empty() {
        return Err(Error::Argument("empty hyperparameter grid".into()));
    }
    if folds < 2 {
        return Err(Error::Argument(format!("{folds} folds, need at least 2")));
    }
    let n = x.nrows();
    if n < folds {
        return Err(Error::Argument(format!(
            "{n} samples cannot fill {folds} folds"
        )));
    }
    if n != y.len() {
        return Err(Error::Argument(format!("{n} rows vs {} labels", y.len())));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream(seed, "cv-folds");
    order.shuffle(&mut rng);
    let base = n / folds;
    let extra = n % folds;
    let mut fold_sets: Vec<Vec<usize>> = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        let mut fold: Vec<usize> = order[start..start + len].to_vec();
        fold.sort_unstable();
        fold_sets.push(fold);
        start += len;
    }

    let take = |idx: &[usize]| -> (Array2<f64>, Vec<u8>) {
        let mut xs = Array2::zeros((idx.len(), x.ncols()));
        let mut ys = Vec::with_capacity(idx.len());
        for (row, &i) in idx.iter().enumerate() {
            xs.row_mut(row).assign(&x.row(i));
            ys.push(y[i]);
        }
        (xs, ys)
    };

    let mut mean_brier = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut total = 0.0;
        for (f, fold) in fold_sets.iter().enumerate() {
            let train_idx: Vec<usize> = (0..n).filter(|i| !fold.contains(i)).collect();
            let (xt, yt) = take(&train_idx);
            let (xv, yv) = take(fold);
            let model = train(spec, xt.view(), &yt, crate::seed::sub_seed(seed, &format!("cv-train:{f}")))?;
            let probs = model.predict_proba_batch(xv.view())?;
            total += brier_score(&probs, &yv)?;
        }
        mean_brier.push(total / folds as f64);
    }

    let mut best_index = 0;
    for (i, &b) in mean_brier.iter().enumerate() {
        if b < mean_brier[best_index] {
            best_index = i;
        }
    }
    Ok(CVResult {
        best_index,
        best_spec: specs[best_index].clone(),
        mean_brier,
        folds,
    })
}

// ---------------------------------------------------------------------------
// persistence

/// A model bundled with the scaler its inputs must pass through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub model: TrainedModel,
    pub scaler: ScalerParams,
}

/// Write a model artifact as pretty JSON (family-tagged, exact float
/// round-trip).
pub fn save_model(artifact: &ModelArtifact, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(artifact)
        .map_err(|e| Error::Numeric(format!("model serialization failed: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelArtifact> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn scaler_maps_range_to_unit_interval() {
        let x = array![[2.0, 7.0], [4.0, 7.0], [3.0, 7.0]];
        let p = minmax_fit(x.view()).unwrap();
        assert_eq!(p.min, vec![2.0, 7.0]);
        assert_eq!(p.max, vec![4.0, 7.0]);
        let scaled = minmax_apply(x.view(), &p).unwrap();
        assert_eq!(scaled[(0, 0)], 0.0); // x = min
        assert_eq!(scaled[(1, 0)], 1.0); // x = max
        assert_eq!(scaled[(2, 0)], 0.5); // midpoint
        // constant feature maps to 0
        assert!(scaled.column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scaler_extrapolates_unless_clipped() {
        let train = array![[2.0], [4.0]];
        let mut p = minmax_fit(train.view()).unwrap();
        let unseen = array![[5.0]];
        assert_eq!(minmax_apply(unseen.view(), &p).unwrap()[(0, 0)], 1.5);
        p.clip = true;
        assert_eq!(minmax_apply(unseen.view(), &p).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn scaler_round_trips_nonconstant_features() {
        let x = array![[1.0, -3.0], [2.5, 9.0], [4.0, 2.0]];
        let p = minmax_fit(x.view()).unwrap();
        let back = minmax_inverse(minmax_apply(x.view(), &p).unwrap().view(), &p).unwrap();
        for (a, b) in x.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn split_is_deterministic_disjoint_exhaustive() {
        let (train, val) = split_indices(10, 0.8, 9);
        assert_eq!(train.len(), 8);
        assert_eq!(val.len(), 2);
        let again = split_indices(10, 0.8, 9);
        assert_eq!((train.clone(), val.clone()), again);
        let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_ne!(split_indices(10, 0.8, 10), (train, val));
    }

    #[test]
    fn brier_score_known_values() {
        let labels = vec![1, 0, 1, 0];
        let perfect = vec![1.0, 0.0, 1.0, 0.0];
        assert_eq!(brier_score(&perfect, &labels).unwrap(), 0.0);
        let coin = vec![0.5; 4];
        assert_eq!(brier_score(&coin, &labels).unwrap(), 0.25);
    }

    #[test]
    fn precision_counts_true_and_false_positives() {
        let probs = vec![0.9, 0.8, 0.4];
        let labels = vec![1, 0, 0];
        assert_eq!(precision_score(&probs, &labels, 0.5).unwrap(), 0.5);
        let none = vec![0.1, 0.2, 0.3];
        assert!(matches!(
            precision_score(&none, &labels, 0.5),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn grid_expands_first_field_slowest() {
        let grid = GridSpec::Adaboost {
            n_estimators: vec![3, 5],
            learning_rate: vec![0.1, 1.0],
        };
        let specs = grid.expand();
        let expected: Vec<(usize, f64)> = vec![(3, 0.1), (3, 1.0), (5, 0.1), (5, 1.0)];
        let got: Vec<(usize, f64)> = specs
            .iter()
            .map(|s| match s {
                ClassifierSpec::Adaboost(p) => (p.n_estimators, p.learning_rate),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn spec_json_round_trips() {
        let spec = ClassifierSpec::Mlp(MlpParams::default());
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"family\":\"mlp\""));
        let back: ClassifierSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn single_class_training_degenerates_to_prior() {
        let x = array![[0.1], [0.4], [0.9]];
        let y = vec![1, 1, 1];
        let model = train(
            &ClassifierSpec::Logistic(LogisticParams::default()),
            x.view(),
            &y,
            0,
        )
        .unwrap();
        assert!(model.is_degenerate());
        assert_eq!(model.predict_proba(array![0.3].view()).unwrap(), 1.0);
    }

    #[test]
    fn prior_model_returns_prior_for_any_input() {
        let model = TrainedModel {
            spec: ClassifierSpec::Logistic(LogisticParams::default()),
            seed: 0,
            params: ModelParams::Prior { p: 0.541 },
        };
        for v in [-3.0, 0.0, 0.7, 42.0] {
            assert_eq!(model.predict_proba(array![v].view()).unwrap(), 0.541);
        }
    }

    #[test]
    fn zero_weight_logistic_outputs_half() {
        let model = TrainedModel {
            spec: ClassifierSpec::Logistic(LogisticParams::default()),
            seed: 0,
            params: ModelParams::Linear(LinearModel {
                weights: vec![0.0, 0.0],
                bias: 0.0,
                link: ProbabilityLink::Sigmoid,
            }),
        };
        assert_eq!(model.predict_proba(array![3.0, -2.0].view()).unwrap(), 0.5);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let model = TrainedModel {
            spec: ClassifierSpec::Logistic(LogisticParams::default()),
            seed: 0,
            params: ModelParams::Prior { p: 0.5 },
        };
        assert!(model.predict_proba(array![f64::NAN].view()).is_err());
        let x = array![[f64::INFINITY], [0.0]];
        assert!(train(
            &ClassifierSpec::Logistic(LogisticParams::default()),
            x.view(),
            &[0, 1],
            0
        )
        .is_err());
    }

    #[test]
    fn cv_single_spec_grid_returns_it() {
        let (x, y) = testdata::blobs(60, 0.3, 1);
        let spec = ClassifierSpec::Logistic(LogisticParams::default());
        let result = grid_search_cv(&[spec.clone()], x.view(), &y, 5, 3).unwrap();
        assert_eq!(result.best_index, 0);
        assert_eq!(result.best_spec, spec);
        assert_eq!(result.mean_brier.len(), 1);
    }

    #[test]
    fn cv_prefers_the_generating_spec() {
        // Data generated by a clean logistic relationship: a barely
        // regularized fit must beat one crushed to near-zero weights.
        let (x, y) = testdata::blobs(200, 0.4, 2);
        let good = ClassifierSpec::Logistic(LogisticParams {
            c: 1.0,
            ..LogisticParams::default()
        });
        let crushed = ClassifierSpec::Logistic(LogisticParams {
            c: 1e-8,
            ..LogisticParams::default()
        });
        let result = grid_search_cv(
            &[crushed.clone(), good.clone()],
            x.view(),
            &y,
            5,
            7,
        )
        .unwrap();
        assert_eq!(result.best_index, 1);
        assert!(result.mean_brier[1] < result.mean_brier[0]);
    }

    #[test]
    fn cv_is_deterministic_and_matches_exhaustive_re_evaluation() {
        let (x, y) = testdata::blobs(80, 0.5, 4);
        let specs = vec![
            ClassifierSpec::Logistic(LogisticParams {
                c: 0.5,
                ..LogisticParams::default()
            }),
            ClassifierSpec::Logistic(LogisticParams {
                c: 8.0,
                ..LogisticParams::default()
            }),
            ClassifierSpec::Adaboost(AdaBoostParams {
                n_estimators: 10,
                learning_rate: 0.1,
            }),
        ];
        let seed = 11;
        let folds = 4;
        let r1 = grid_search_cv(&specs, x.view(), &y, folds, seed).unwrap();
        let r2 = grid_search_cv(&specs, x.view(), &y, folds, seed).unwrap();
        assert_eq!(r1, r2);

        // Independent oracle: rebuild the same folds and evaluate every spec.
        let n = x.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = stream(seed, "cv-folds");
        order.shuffle(&mut rng);
        let base = n / folds;
        let extra = n % folds;
        let mut start = 0;
        let mut oracle = vec![0.0; specs.len()];
        for f in 0..folds {
            let len = base + usize::from(f < extra);
            let mut fold: Vec<usize> = order[start..start + len].to_vec();
            fold.sort_unstable();
            start += len;
            let train_idx: Vec<usize> = (0..n).filter(|i| !fold.contains(i)).collect();
            let mut xt = Array2::zeros((train_idx.len(), 2));
            let mut yt = Vec::new();
            for (row, &i) in train_idx.iter().enumerate() {
                xt.row_mut(row).assign(&x.row(i));
                yt.push(y[i]);
            }
            let mut xv = Array2::zeros((fold.len(), 2));
            let mut yv = Vec::new();
            for (row, &i) in fold.iter().enumerate() {
                xv.row_mut(row).assign(&x.row(i));
                yv.push(y[i]);
            }
            for (si, spec) in specs.iter().enumerate() {
                let model = train(
                    spec,
                    xt.view(),
                    &yt,
                    crate::seed::sub_seed(seed, &format!("cv-train:{f}")),
                )
                .unwrap();
                let probs = model.predict_proba_batch(xv.view()).unwrap();
                oracle[si] += brier_score(&probs, &yv).unwrap();
            }
        }
        for v in &mut oracle {
            *v /= folds as f64;
        }
        assert_eq!(r1.mean_brier, oracle);
        let oracle_best = oracle
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(r1.best_index, oracle_best);
    }

    #[test]
    fn cv_ties_go_to_first_in_grid_order() {
        let (x, y) = testdata::blobs(40, 0.3, 5);
        let spec = ClassifierSpec::Logistic(LogisticParams::default());
        let result = grid_search_cv(&[spec.clone(), spec], x.view(), &y, 4, 1).unwrap();
        assert_eq!(result.mean_brier[0], result.mean_brier[1]);
        assert_eq!(result.best_index, 0);
    }

    #[test]
    fn empty_grid_is_an_argument_error() {
        let (x, y) = testdata::blobs(20, 0.3, 6);
        assert!(matches!(
            grid_search_cv(&[], x.view(), &y, 5, 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn all_families_beat_a_coin_on_separable_data() {
        let (x, y) = testdata::blobs(1000, 0.3, 8);
        let specs = vec![
            ClassifierSpec::Logistic(LogisticParams {
                c: 8.0,
                max_iter: 75,
                class_weight: ClassWeight::Balanced,
                ..LogisticParams::default()
            }),
            ClassifierSpec::SgdLinear(SgdParams {
                loss: SgdLoss::ModifiedHuber,
                alpha: 0.001,
                max_iter: 200,
                learning_rate: SgdSchedule::Optimal,
                ..SgdParams::default()
            }),
            ClassifierSpec::Mlp(MlpParams {
                hidden_layer_sizes: vec![64, 64],
                activation: Activation::Relu,
                alpha: 1e-6,
                batch_size: 200,
                solver: MlpSolver::Adam,
                max_epochs: 100,
                ..MlpParams::default()
            }),
            ClassifierSpec::Adaboost(AdaBoostParams {
                n_estimators: 100,
                learning_rate: 0.1,
            }),
            ClassifierSpec::Histgb(HistGbParams::default()),
        ];
        for spec in &specs {
            let model = train(spec, x.view(), &y, 13).unwrap();
            assert!(!model.is_degenerate());
            let probs = model.predict_proba_batch(x.view()).unwrap();
            assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
            let brier = brier_score(&probs, &y).unwrap();
            assert!(
                brier < 0.25,
                "{} scored {brier}, no better than a coin",
                spec.family_name()
            );
        }
    }

    #[test]
    fn training_is_deterministic_given_seed() {
        let (x, y) = testdata::blobs(200, 0.4, 9);
        for spec in [
            ClassifierSpec::SgdLinear(SgdParams::default()),
            ClassifierSpec::Mlp(MlpParams {
                hidden_layer_sizes: vec![8],
                max_epochs: 20,
                ..MlpParams::default()
            }),
            ClassifierSpec::Histgb(HistGbParams {
                max_iter: 10,
                ..HistGbParams::default()
            }),
        ] {
            let a = train(&spec, x.view(), &y, 21).unwrap();
            let b = train(&spec, x.view(), &y, 21).unwrap();
            assert_eq!(a, b, "{} not deterministic", spec.family_name());
        }
    }

    #[test]
    fn model_artifact_round_trips_exactly() {
        let (x, y) = testdata::blobs(150, 0.4, 10);
        let scaler = minmax_fit(x.view()).unwrap();
        let scaled = minmax_apply(x.view(), &scaler).unwrap();
        for spec in [
            ClassifierSpec::Logistic(LogisticParams::default()),
            ClassifierSpec::SgdLinear(SgdParams::default()),
            ClassifierSpec::Mlp(MlpParams {
                hidden_layer_sizes: vec![6],
                max_epochs: 10,
                ..MlpParams::default()
            }),
            ClassifierSpec::Adaboost(AdaBoostParams {
                n_estimators: 5,
                learning_rate: 0.5,
            }),
            ClassifierSpec::Histgb(HistGbParams {
                max_iter: 5,
                ..HistGbParams::default()
            }),
        ] {
            let model = train(&spec, scaled.view(), &y, 33).unwrap();
            let artifact = ModelArtifact {
                model,
                scaler: scaler.clone(),
            };
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("model.json");
            save_model(&artifact, &path).unwrap();
            let back = load_model(&path).unwrap();
            assert_eq!(artifact, back);
        }
    }
}
