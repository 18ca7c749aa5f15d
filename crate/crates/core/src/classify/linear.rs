//! Linear probability models: regularized logistic regression under three
//! solvers, and a stochastic-gradient linear classifier with margin losses.
//!
//! Logistic regression minimizes
//!   `F(w, b) = sum_i wt_i * log(1 + exp(-s_i * (w.x_i + b))) + R(w) / C`
//! with `s_i = 2 y_i - 1`, optional balanced class weights
//! `wt = n / (2 n_class)`, and an unpenalized bias. The `newton_cholesky`
//! solver runs damped Newton steps on the smooth L2 objective, `lbfgs` a
//! limited-memory quasi-Newton method, and `liblinear` an accelerated
//! proximal-gradient iteration that also covers the L1 and elasticnet
//! penalties (the smooth solvers fall back to it for those, since Newton
//! steps need a twice-differentiable objective).

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;

use super::{
    sigmoid, ClassWeight, LinearModel, LogisticParams, LogisticSolver, ModelParams, Penalty,
    ProbabilityLink, SgdLoss, SgdParams, SgdSchedule,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::seed::stream;

/// `ln(1 + e^-z)` without overflow.
fn softplus_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// Per-sample weights: 1, or `n / (2 n_class)` when balancing.
fn sample_weights(y: &[u8], class_weight: ClassWeight) -> Vec<f64> {
    match class_weight {
        ClassWeight::None => vec![1.0; y.len()],
        ClassWeight::Balanced => {
            let n = y.len() as f64;
            let n_pos = y.iter().filter(|&&v| v == 1).count() as f64;
            let w_pos = n / (2.0 * n_pos);
            let w_neg = n / (2.0 * (n - n_pos));
            y.iter()
                .map(|&v| if v == 1 { w_pos } else { w_neg })
                .collect()
        }
    }
}

/// Weighted data log-likelihood part and its gradient in `(w, b)`.
struct Smooth<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [u8],
    wt: &'a [f64],
    /// Coefficient of the quadratic penalty `ridge/2 * |w|^2`.
    ridge: f64,
}

impl Smooth<'_> {
    fn value(&self, w: &Array1<f64>, b: f64) -> f64 {
        let scores = self.x.dot(w) + b;
        let mut total = 0.0;
        for (i, &f) in scores.iter().enumerate() {
            let s = if self.y[i] == 1 { 1.0 } else { -1.0 };
            total += self.wt[i] * softplus_neg(s * f);
        }
        total + 0.5 * self.ridge * w.dot(w)
    }

    fn gradient(&self, w: &Array1<f64>, b: f64) -> (Array1<f64>, f64) {
        let scores = self.x.dot(w) + b;
        let mut resid = Array1::zeros(self.y.len());
        for (i, &f) in scores.iter().enumerate() {
            resid[i] = self.wt[i] * (sigmoid(f) - self.y[i] as f64);
        }
        let gw = self.x.t().dot(&resid) + &(w * self.ridge);
        let gb = resid.sum();
        (gw, gb)
    }
}

/// Damped Newton iteration on the L2 objective; the Hessian solve uses a
/// Cholesky factorization.
fn fit_newton(smooth: &Smooth<'_>, max_iter: usize, tol: f64) -> Result<(Array1<f64>, f64)> {
    let d = smooth.x.ncols();
    let n = smooth.x.nrows();
    let mut w = Array1::zeros(d);
    let mut b = 0.0;
    for _ in 0..max_iter {
        let (gw, gb) = smooth.gradient(&w, b);
        let gmax = gw.iter().fold(gb.abs(), |m, v| m.max(v.abs()));
        if gmax < tol {
            break;
        }
        // Hessian over (w, b): [X' S X + ridge I, X' s; s' X, sum s]
        let scores = smooth.x.dot(&w) + b;
        let mut s = Array1::zeros(n);
        for (i, &f) in scores.iter().enumerate() {
            let p = sigmoid(f);
            s[i] = (smooth.wt[i] * p * (1.0 - p)).max(1e-12);
        }
        let mut h = Array2::zeros((d + 1, d + 1));
        for a in 0..d {
            for c in a..d {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += smooth.x[(i, a)] * s[i] * smooth.x[(i, c)];
                }
                if a == c {
                    acc += smooth.ridge;
                }
                h[(a, c)] = acc;
                h[(c, a)] = acc;
            }
            let mut acc = 0.0;
            for i in 0..n {
                acc += smooth.x[(i, a)] * s[i];
            }
            h[(a, d)] = acc;
            h[(d, a)] = acc;
        }
        h[(d, d)] = s.sum().max(1e-12);

        let mut g = Array1::zeros(d + 1);
        g.slice_mut(ndarray::s![..d]).assign(&gw);
        g[d] = gb;
        let l = linalg::cholesky(&h)?;
        let mut step = g.to_vec();
        linalg::solve_lower_inplace(&l, &mut step);
        linalg::solve_lower_transpose_inplace(&l, &mut step);

        // Backtrack until the objective actually decreases.
        let f0 = smooth.value(&w, b);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut wn = w.clone();
            for j in 0..d {
                wn[j] -= t * step[j];
            }
            let bn = b - t * step[d];
            if smooth.value(&wn, bn) <= f0 {
                w = wn;
                b = bn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((w, b))
}

/// Limited-memory BFGS with Armijo backtracking on the L2 objective.
fn fit_lbfgs(smooth: &Smooth<'_>, max_iter: usize, tol: f64) -> (Array1<f64>, f64) {
    let d = smooth.x.ncols();
    // Parameter vector theta = [w; b].
    let value = |theta: &Array1<f64>| {
        let w = theta.slice(ndarray::s![..d]).to_owned();
        smooth.value(&w, theta[d])
    };
    let grad = |theta: &Array1<f64>| {
        let w = theta.slice(ndarray::s![..d]).to_owned();
        let (gw, gb) = smooth.gradient(&w, theta[d]);
        let mut g = Array1::zeros(d + 1);
        g.slice_mut(ndarray::s![..d]).assign(&gw);
        g[d] = gb;
        g
    };

    let m = 10;
    let mut theta = Array1::zeros(d + 1);
    let mut f = value(&theta);
    let mut g = grad(&theta);
    let mut s_hist: Vec<Array1<f64>> = Vec::new();
    let mut y_hist: Vec<Array1<f64>> = Vec::new();

    for _ in 0..max_iter {
        if g.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())) < tol {
            break;
        }
        // Two-loop recursion.
        let mut q = g.clone();
        let k = s_hist.len();
        let mut alphas = vec![0.0; k];
        for i in (0..k).rev() {
            let rho = 1.0 / y_hist[i].dot(&s_hist[i]);
            alphas[i] = rho * s_hist[i].dot(&q);
            q = &q - &(&y_hist[i] * alphas[i]);
        }
        if let Some(last) = k.checked_sub(1) {
            let gamma = s_hist[last].dot(&y_hist[last]) / y_hist[last].dot(&y_hist[last]);
            q *= gamma;
        }
        for i in 0..k {
            let rho = 1.0 / y_hist[i].dot(&s_hist[i]);
            let beta = rho * y_hist[i].dot(&q);
            q = &q + &(&s_hist[i] * (alphas[i] - beta));
        }
        let direction = -q;

        // Armijo backtracking.
        let slope = g.dot(&direction);
        if slope >= 0.0 {
            break; // not a descent direction; history went stale
        }
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let cand = &theta + &(&direction * t);
            let fc = value(&cand);
            if fc <= f + 1e-4 * t * slope {
                let gc = grad(&cand);
                let s = &cand - &theta;
                let yv = &gc - &g;
                if yv.dot(&s) > 1e-12 {
                    s_hist.push(s);
                    y_hist.push(yv);
                    if s_hist.len() > m {
                        s_hist.remove(0);
                        y_hist.remove(0);
                    }
                }
                theta = cand;
                f = fc;
                g = gc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (theta.slice(ndarray::s![..d]).to_owned(), theta[d])
}

/// FISTA: accelerated proximal gradient on `smooth + mu * |w|_1` (the bias
/// and the quadratic penalty live in the smooth part).
fn fit_proximal(smooth: &Smooth<'_>, mu: f64, max_iter: usize, tol: f64) -> (Array1<f64>, f64) {
    let d = smooth.x.ncols();
    let n = smooth.x.nrows();
    // Upper bound on the logistic Hessian: 1/4 * max weight * |X|_F^2 plus
    // the ridge, and the bias column of ones.
    let wmax = smooth.wt.iter().fold(0.0_f64, |m, &v| m.max(v));
    let xnorm: f64 = smooth.x.iter().map(|v| v * v).sum::<f64>() + n as f64;
    let lip = 0.25 * wmax * xnorm + smooth.ridge;
    let step = 1.0 / lip;

    let mut w = Array1::zeros(d);
    let mut b = 0.0;
    let mut zw = w.clone();
    let mut zb = b;
    let mut momentum = 1.0_f64;
    for _ in 0..max_iter {
        let (gw, gb) = smooth.gradient(&zw, zb);
        let mut wn = Array1::zeros(d);
        for j in 0..d {
            let v = zw[j] - step * gw[j];
            let thr = step * mu;
            wn[j] = if v > thr {
                v - thr
            } else if v < -thr {
                v + thr
            } else {
                0.0
            };
        }
        let bn = zb - step * gb;
        let m_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let mix = (momentum - 1.0) / m_next;
        zw = &wn + &((&wn - &w) * mix);
        zb = bn + (bn - b) * mix;
        let moved = (0..d)
            .map(|j| (wn[j] - w[j]).abs())
            .fold((bn - b).abs(), f64::max);
        w = wn;
        b = bn;
        momentum = m_next;
        if moved < tol {
            break;
        }
    }
    (w, b)
}

pub(super) fn fit_logistic(
    params: &LogisticParams,
    x: ArrayView2<'_, f64>,
    y: &[u8],
) -> Result<ModelParams> {
    if params.c <= 0.0 {
        return Err(Error::Argument(format!(
            "inverse regularization c={} must be positive",
            params.c
        )));
    }
    let wt = sample_weights(y, params.class_weight);
    let inv_c = 1.0 / params.c;
    // Split the penalty into a smooth quadratic part and an L1 part.
    let (ridge, mu) = match params.penalty {
        Penalty::L2 => (inv_c, 0.0),
        Penalty::L1 => (0.0, inv_c),
        Penalty::Elasticnet => (
            (1.0 - params.l1_ratio) * inv_c,
            params.l1_ratio * inv_c,
        ),
    };
    let smooth = Smooth {
        x: x.view(),
        y,
        wt: &wt,
        ridge,
    };
    // Newton and L-BFGS need a smooth objective; with an L1 term every
    // solver routes through the proximal iteration.
    let (w, b) = if mu > 0.0 || params.solver == LogisticSolver::Liblinear {
        fit_proximal(&smooth, mu, params.max_iter.max(200), params.tol)
    } else {
        match params.solver {
            LogisticSolver::NewtonCholesky => fit_newton(&smooth, params.max_iter, params.tol)?,
            _ => fit_lbfgs(&smooth, params.max_iter, params.tol),
        }
    };
    Ok(ModelParams::Linear(LinearModel {
        weights: w.to_vec(),
        bias: b,
        link: ProbabilityLink::Sigmoid,
    }))
}

// ---------------------------------------------------------------------------
// stochastic gradient descent

/// Loss derivative with respect to the raw score, at margin `z = s * f`.
fn dloss(loss: SgdLoss, f: f64, s: f64) -> f64 {
    let z = s * f;
    match loss {
        SgdLoss::ModifiedHuber => {
            if z >= 1.0 {
                0.0
            } else if z >= -1.0 {
                -2.0 * (1.0 - z) * s
            } else {
                -4.0 * s
            }
        }
        SgdLoss::LogLoss => -s / (1.0 + z.exp()),
        SgdLoss::Hinge => {
            if z < 1.0 {
                -s
            } else {
                0.0
            }
        }
    }
}

fn loss_value(loss: SgdLoss, f: f64, s: f64) -> f64 {
    let z = s * f;
    match loss {
        SgdLoss::ModifiedHuber => {
            if z >= 1.0 {
                0.0
            } else if z >= -1.0 {
                (1.0 - z).powi(2)
            } else {
                -4.0 * z
            }
        }
        SgdLoss::LogLoss => softplus_neg(z),
        SgdLoss::Hinge => (1.0 - z).max(0.0),
    }
}

fn penalty_value(penalty: Penalty, l1_ratio: f64, w: &Array1<f64>) -> f64 {
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    let l2: f64 = 0.5 * w.dot(w);
    match penalty {
        Penalty::L2 => l2,
        Penalty::L1 => l1,
        Penalty::Elasticnet => l1_ratio * l1 + (1.0 - l1_ratio) * l2,
    }
}

/// Initial time offset for the `optimal` schedule, chosen so the first step
/// has a sensible magnitude for the loss in use.
fn optimal_t0(loss: SgdLoss, alpha: f64) -> f64 {
    let typw = (1.0 / alpha.sqrt()).sqrt();
    let d = dloss(loss, -typw, 1.0).abs().max(1.0);
    let eta0 = typw / d;
    1.0 / (eta0 * alpha)
}

/// Mean objective (loss + alpha * penalty) over an index set.
fn objective(
    params: &SgdParams,
    x: ArrayView2<'_, f64>,
    y: &[u8],
    idx: &[usize],
    w: &Array1<f64>,
    b: f64,
) -> f64 {
    let mut total = 0.0;
    for &i in idx {
        let f = x.row(i).dot(w) + b;
        let s = if y[i] == 1 { 1.0 } else { -1.0 };
        total += loss_value(params.loss, f, s);
    }
    total / idx.len() as f64 + params.alpha * penalty_value(params.penalty, params.l1_ratio, w)
}

pub(super) fn fit_sgd(
    params: &SgdParams,
    x: ArrayView2<'_, f64>,
    y: &[u8],
    seed: u64,
) -> Result<ModelParams> {
    if params.alpha <= 0.0 {
        return Err(Error::Argument(format!(
            "penalty strength alpha={} must be positive",
            params.alpha
        )));
    }
    let n = x.nrows();
    let d = x.ncols();

    // Optional held-out fraction for early stopping.
    let mut order: Vec<usize> = (0..n).collect();
    let (train_idx, val_idx) = if params.early_stopping {
        let mut rng = stream(seed, "sgd-val");
        order.shuffle(&mut rng);
        let n_val = ((params.validation_fraction * n as f64).floor() as usize).max(1);
        let (val, train) = order.split_at(n_val);
        let mut train = train.to_vec();
        let mut val = val.to_vec();
        train.sort_unstable();
        val.sort_unstable();
        (train, val)
    } else {
        (order, Vec::new())
    };
    if train_idx.is_empty() {
        return Err(Error::Argument("early stopping left no training rows".into()));
    }

    let mut w: Array1<f64> = Array1::zeros(d);
    let mut b = 0.0;
    let mut eta = params.eta0;
    let t0 = optimal_t0(params.loss, params.alpha);
    let mut t = 1.0;

    let mut best = f64::INFINITY;
    let mut stall = 0usize;
    let mut shuffled = train_idx.clone();
    for epoch in 0..params.max_iter {
        let mut rng = stream(seed, &format!("sgd-epoch:{epoch}"));
        shuffled.shuffle(&mut rng);
        for &i in &shuffled {
            let step = match params.learning_rate {
                SgdSchedule::Constant => params.eta0,
                SgdSchedule::Optimal => 1.0 / (params.alpha * (t + t0)),
                SgdSchedule::Invscaling => params.eta0 / t.sqrt(),
                SgdSchedule::Adaptive => eta,
            };
            let f = x.row(i).dot(&w) + b;
            let s = if y[i] == 1 { 1.0 } else { -1.0 };
            let g = dloss(params.loss, f, s);
            for j in 0..d {
                let reg = match params.penalty {
                    Penalty::L2 => w[j],
                    Penalty::L1 => w[j].signum() * f64::from(w[j] != 0.0),
                    Penalty::Elasticnet => {
                        params.l1_ratio * w[j].signum() * f64::from(w[j] != 0.0)
                            + (1.0 - params.l1_ratio) * w[j]
                    }
                };
                w[j] -= step * (g * x[(i, j)] + params.alpha * reg);
            }
            b -= step * g;
            t += 1.0;
        }

        // Plateau bookkeeping on the held-out set when early stopping is on,
        // otherwise on the training objective.
        let monitored = if params.early_stopping {
            objective(params, x, y, &val_idx, &w, b)
        } else {
            objective(params, x, y, &train_idx, &w, b)
        };
        if monitored > best - params.tol {
            stall += 1;
        } else {
            stall = 0;
        }
        best = best.min(monitored);
        if stall >= params.n_iter_no_change {
            if params.learning_rate == SgdSchedule::Adaptive {
                eta /= 5.0;
                stall = 0;
                if eta < 1e-6 {
                    break;
                }
            } else {
                break;
            }
        }
    }

    let link = match params.loss {
        SgdLoss::LogLoss => ProbabilityLink::Sigmoid,
        SgdLoss::ModifiedHuber | SgdLoss::Hinge => ProbabilityLink::ClippedMargin,
    };
    Ok(ModelParams::Linear(LinearModel {
        weights: w.to_vec(),
        bias: b,
        link,
    }))
}

#[cfg(test)]
mod tests {
    use super::super::{testdata, train, ClassifierSpec, TrainedModel};
    use super::*;
    use ndarray::array;

    fn separable_1d() -> (Array2<f64>, Vec<u8>) {
        let mut x = Array2::zeros((100, 1));
        let mut y = Vec::new();
        for i in 0..100 {
            let label = u8::from(i % 2 == 1);
            x[(i, 0)] = label as f64;
            y.push(label);
        }
        (x, y)
    }

    fn proba(model: &TrainedModel, v: f64) -> f64 {
        model.predict_proba(array![v].view()).unwrap()
    }

    #[test]
    fn logistic_separates_a_line() {
        let (x, y) = separable_1d();
        for solver in [
            LogisticSolver::Lbfgs,
            LogisticSolver::Liblinear,
            LogisticSolver::NewtonCholesky,
        ] {
            let spec = ClassifierSpec::Logistic(LogisticParams {
                solver,
                ..LogisticParams::default()
            });
            let model = train(&spec, x.view(), &y, 0).unwrap();
            assert!(
                proba(&model, 0.0) < 0.5 && 0.5 < proba(&model, 1.0),
                "{solver:?} failed to order the classes"
            );
        }
    }

    #[test]
    fn logistic_weight_is_positive_and_probability_monotone() {
        let (x, y) = separable_1d();
        let model = train(
            &ClassifierSpec::Logistic(LogisticParams::default()),
            x.view(),
            &y,
            0,
        )
        .unwrap();
        let ModelParams::Linear(lin) = &model.params else {
            panic!("expected a linear model");
        };
        assert!(lin.weights[0] > 0.0);
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        for pair in grid.windows(2) {
            assert!(proba(&model, pair[0]) < proba(&model, pair[1]));
        }
    }

    #[test]
    fn stronger_regularization_shrinks_weights() {
        let (x, y) = testdata::blobs(300, 0.4, 17);
        let weight_norm = |c: f64, penalty: Penalty| {
            let spec = ClassifierSpec::Logistic(LogisticParams {
                c,
                penalty,
                ..LogisticParams::default()
            });
            let model = train(&spec, x.view(), &y, 0).unwrap();
            let ModelParams::Linear(lin) = model.params else {
                panic!("expected a linear model");
            };
            lin.weights.iter().map(|v| v.abs()).sum::<f64>()
        };
        assert!(weight_norm(0.01, Penalty::L2) < weight_norm(10.0, Penalty::L2));
        assert!(weight_norm(0.01, Penalty::L1) < weight_norm(10.0, Penalty::L1));
    }

    #[test]
    fn l1_with_smooth_solvers_matches_the_proximal_path() {
        // The smooth solvers cannot handle L1 and must defer to the proximal
        // iteration, so all three produce the same fit.
        let (x, y) = testdata::blobs(120, 0.5, 23);
        let fit = |solver: LogisticSolver| {
            let spec = ClassifierSpec::Logistic(LogisticParams {
                penalty: Penalty::L1,
                solver,
                ..LogisticParams::default()
            });
            train(&spec, x.view(), &y, 0).unwrap().params
        };
        let a = fit(LogisticSolver::Lbfgs);
        let b = fit(LogisticSolver::Liblinear);
        let c = fit(LogisticSolver::NewtonCholesky);
        assert_eq!(a, b);
        assert_eq!(b, c);
    }

    #[test]
    fn balanced_weights_shift_the_boundary_toward_the_rare_class() {
        // 90/10 imbalance: balancing should raise the probability assigned
        // to the rare positive class.
        let mut x = Array2::zeros((100, 1));
        let mut y = Vec::new();
        for i in 0..100 {
            let label = u8::from(i < 10);
            x[(i, 0)] = if label == 1 { 1.0 } else { 0.0 };
            y.push(label);
        }
        let fit = |class_weight| {
            let spec = ClassifierSpec::Logistic(LogisticParams {
                class_weight,
                c: 0.5,
                ..LogisticParams::default()
            });
            train(&spec, x.view(), &y, 0).unwrap()
        };
        let plain = fit(ClassWeight::None);
        let balanced = fit(ClassWeight::Balanced);
        assert!(proba(&balanced, 0.5) > proba(&plain, 0.5));
    }

    #[test]
    fn newton_and_lbfgs_agree_on_the_l2_optimum() {
        let (x, y) = testdata::blobs(200, 0.5, 29);
        let fit = |solver| {
            let spec = ClassifierSpec::Logistic(LogisticParams {
                solver,
                max_iter: 200,
                ..LogisticParams::default()
            });
            let model = train(&spec, x.view(), &y, 0).unwrap();
            let ModelParams::Linear(lin) = model.params else {
                panic!("expected a linear model")
            };
            lin
        };
        let a = fit(LogisticSolver::NewtonCholesky);
        let b = fit(LogisticSolver::Lbfgs);
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert!((wa - wb).abs() < 1e-4, "{:?} vs {:?}", a.weights, b.weights);
        }
        assert!((a.bias - b.bias).abs() < 1e-4);
    }

    #[test]
    fn sgd_all_losses_learn_separable_data() {
        let (x, y) = testdata::blobs(500, 0.3, 31);
        for loss in [SgdLoss::ModifiedHuber, SgdLoss::LogLoss, SgdLoss::Hinge] {
            let spec = ClassifierSpec::SgdLinear(SgdParams {
                loss,
                alpha: 0.001,
                max_iter: 200,
                ..SgdParams::default()
            });
            let model = train(&spec, x.view(), &y, 3).unwrap();
            let probs = model
                .predict_proba_batch(x.view())
                .unwrap();
            let correct = probs
                .iter()
                .zip(&y)
                .filter(|(&p, &l)| (p > 0.5) == (l == 1))
                .count();
            assert!(
                correct as f64 / y.len() as f64 > 0.95,
                "{loss:?} accuracy too low"
            );
        }
    }

    #[test]
    fn sgd_margin_losses_use_the_clipped_link() {
        let (x, y) = testdata::blobs(100, 0.3, 37);
        for (loss, link) in [
            (SgdLoss::ModifiedHuber, ProbabilityLink::ClippedMargin),
            (SgdLoss::Hinge, ProbabilityLink::ClippedMargin),
            (SgdLoss::LogLoss, ProbabilityLink::Sigmoid),
        ] {
            let spec = ClassifierSpec::SgdLinear(SgdParams {
                loss,
                ..SgdParams::default()
            });
            let model = train(&spec, x.view(), &y, 5).unwrap();
            let ModelParams::Linear(lin) = model.params else {
                panic!("expected a linear model")
            };
            assert_eq!(lin.link, link);
        }
    }

    #[test]
    fn sgd_schedules_and_early_stopping_run() {
        let (x, y) = testdata::blobs(200, 0.4, 41);
        for schedule in [
            SgdSchedule::Constant,
            SgdSchedule::Optimal,
            SgdSchedule::Adaptive,
            SgdSchedule::Invscaling,
        ] {
            for early in [false, true] {
                let spec = ClassifierSpec::SgdLinear(SgdParams {
                    learning_rate: schedule,
                    early_stopping: early,
                    max_iter: 60,
                    ..SgdParams::default()
                });
                let model = train(&spec, x.view(), &y, 7).unwrap();
                let probs = model.predict_proba_batch(x.view()).unwrap();
                assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
            }
        }
    }
}
