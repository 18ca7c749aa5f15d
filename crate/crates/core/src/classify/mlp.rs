//! A fully-connected feed-forward network with a sigmoid output unit,
//! trained on mean binary cross-entropy with an L2 weight penalty by
//! mini-batch gradient descent (momentum sgd or adaptive-moment updates).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, Activation, MlpParams, MlpSchedule, MlpSolver, ModelParams};
use crate::error::{Error, Result};
use crate::seed::stream;

/// Fitted network: `weights[l]` maps layer `l` activations (rows of a batch)
/// to layer `l + 1` pre-activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub activation: Activation,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

fn activate(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Tanh => z.tanh(),
        Activation::Relu => z.max(0.0),
        Activation::Sigmoid => sigmoid(z),
    }
}

/// Derivative expressed through the activation value itself.
fn activate_prime(a: Activation, v: f64) -> f64 {
    match a {
        Activation::Tanh => 1.0 - v * v,
        Activation::Relu => f64::from(v > 0.0),
        Activation::Sigmoid => v * (1.0 - v),
    }
}

impl MlpModel {
    /// Forward pass over a batch; returns every layer's activations.
    fn forward(&self, x: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let depth = self.weights.len();
        let mut acts = Vec::with_capacity(depth + 1);
        acts.push(x.to_owned());
        for l in 0..depth {
            let mut z = acts[l].dot(&self.weights[l]);
            z += &self.biases[l];
            let out = if l + 1 == depth {
                z.mapv(sigmoid)
            } else {
                z.mapv(|v| activate(self.activation, v))
            };
            acts.push(out);
        }
        acts
    }

    pub fn proba_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.weights[0].nrows() {
            return Err(Error::Argument(format!(
                "{} features, network takes {}",
                x.ncols(),
                self.weights[0].nrows()
            )));
        }
        let acts = self.forward(x);
        Ok(acts.last().expect("nonempty").column(0).to_vec())
    }

    pub fn proba(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        let row = x.insert_axis(Axis(0));
        Ok(self.proba_batch(row)?[0])
    }
}

/// Adam/momentum state per parameter tensor.
struct Optimizer {
    solver: MlpSolver,
    lr: f64,
    momentum: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl Optimizer {
    fn new(model: &MlpModel, params: &MlpParams) -> Self {
        let zeros_w: Vec<Array2<f64>> = model.weights.iter().map(|w| Array2::zeros(w.dim())).collect();
        let zeros_b: Vec<Array1<f64>> = model.biases.iter().map(|b| Array1::zeros(b.len())).collect();
        Self {
            solver: params.solver,
            lr: params.learning_rate_init,
            momentum: params.momentum,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m_w: zeros_w.clone(),
            v_w: zeros_w,
            m_b: zeros_b.clone(),
            v_b: zeros_b,
        }
    }

    fn step(&mut self, model: &mut MlpModel, grads_w: &[Array2<f64>], grads_b: &[Array1<f64>]) {
        match self.solver {
            MlpSolver::Adam => {
                self.t += 1;
                let bc1 = 1.0 - self.beta1.powi(self.t);
                let bc2 = 1.0 - self.beta2.powi(self.t);
                for l in 0..model.weights.len() {
                    self.m_w[l] = &self.m_w[l] * self.beta1 + &(&grads_w[l] * (1.0 - self.beta1));
                    self.v_w[l] = &self.v_w[l] * self.beta2
                        + &(grads_w[l].mapv(|g| g * g) * (1.0 - self.beta2));
                    let update =
                        &self.m_w[l] / bc1 / (self.v_w[l].mapv(|v| (v / bc2).sqrt()) + self.eps);
                    model.weights[l] = &model.weights[l] - &(update * self.lr);

                    self.m_b[l] = &self.m_b[l] * self.beta1 + &(&grads_b[l] * (1.0 - self.beta1));
                    self.v_b[l] = &self.v_b[l] * self.beta2
                        + &(grads_b[l].mapv(|g| g * g) * (1.0 - self.beta2));
                    let update =
                        &self.m_b[l] / bc1 / (self.v_b[l].mapv(|v| (v / bc2).sqrt()) + self.eps);
                    model.biases[l] = &model.biases[l] - &(update * self.lr);
                }
            }
            MlpSolver::Sgd => {
                // Nesterov momentum: reuse the m_* slots as velocities.
                for l in 0..model.weights.len() {
                    self.m_w[l] = &self.m_w[l] * self.momentum - &(&grads_w[l] * self.lr);
                    model.weights[l] = &model.weights[l] + &(&self.m_w[l] * self.momentum)
                        - &(&grads_w[l] * self.lr);
                    self.m_b[l] = &self.m_b[l] * self.momentum - &(&grads_b[l] * self.lr);
                    model.biases[l] = &model.biases[l] + &(&self.m_b[l] * self.momentum)
                        - &(&grads_b[l] * self.lr);
                }
            }
        }
    }
}

fn bce(p: f64, y: f64) -> f64 {
    let eps = 1e-10;
    let p = p.clamp(eps, 1.0 - eps);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

pub(super) fn fit_mlp(
    params: &MlpParams,
    x: ArrayView2<'_, f64>,
    y: &[u8],
    seed: u64,
) -> Result<ModelParams> {
    if params.hidden_layer_sizes.is_empty() || params.hidden_layer_sizes.contains(&0) {
        return Err(Error::Argument(format!(
            "bad hidden layer sizes {:?}",
            params.hidden_layer_sizes
        )));
    }
    if params.batch_size == 0 {
        return Err(Error::Argument("batch_size must be positive".into()));
    }
    let n = x.nrows();
    let d = x.ncols();
    let mut sizes = vec![d];
    sizes.extend_from_slice(&params.hidden_layer_sizes);
    sizes.push(1);

    // Uniform init with layer-dependent bounds; narrower for the saturating
    // sigmoid.
    let factor = match params.activation {
        Activation::Sigmoid => 2.0,
        Activation::Tanh | Activation::Relu => 6.0,
    };
    let mut rng = stream(seed, "mlp-init");
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..sizes.len() - 1 {
        let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
        let bound = (factor / (fan_in + fan_out) as f64).sqrt();
        let mut w = Array2::zeros((fan_in, fan_out));
        for v in w.iter_mut() {
            *v = rng.gen_range(-bound..bound);
        }
        let mut b = Array1::zeros(fan_out);
        for v in b.iter_mut() {
            *v = rng.gen_range(-bound..bound);
        }
        weights.push(w);
        biases.push(b);
    }
    let mut model = MlpModel {
        activation: params.activation,
        weights,
        biases,
    };
    let mut opt = Optimizer::new(&model, params);

    let batch = params.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    let mut stall = 0usize;

    for epoch in 0..params.max_epochs {
        let mut rng = stream(seed, &format!("mlp-epoch:{epoch}"));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0.0;
        for chunk in order.chunks(batch) {
            let m = chunk.len();
            let mut xb = Array2::zeros((m, d));
            let mut yb = Array1::zeros(m);
            for (row, &i) in chunk.iter().enumerate() {
                xb.row_mut(row).assign(&x.row(i));
                yb[row] = y[i] as f64;
            }

            let acts = model.forward(xb.view());
            let probs = acts.last().expect("nonempty");
            let mut data_loss = 0.0;
            for (i, &yv) in yb.iter().enumerate() {
                data_loss += bce(probs[(i, 0)], yv);
            }
            let penalty: f64 = model.weights.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).sum();
            epoch_loss += data_loss / m as f64 + params.alpha * penalty / (2.0 * m as f64);
            n_batches += 1.0;

            // Backward pass: delta at the output is (p - y) / m for the mean
            // cross-entropy through the sigmoid.
            let depth = model.weights.len();
            let mut grads_w = vec![Array2::zeros((0, 0)); depth];
            let mut grads_b = vec![Array1::zeros(0); depth];
            let mut delta = probs.clone();
            for (i, &yv) in yb.iter().enumerate() {
                delta[(i, 0)] = (delta[(i, 0)] - yv) / m as f64;
            }
            for l in (0..depth).rev() {
                grads_w[l] = acts[l].t().dot(&delta) + &(&model.weights[l] * (params.alpha / m as f64));
                grads_b[l] = delta.sum_axis(Axis(0));
                if l > 0 {
                    let mut back = delta.dot(&model.weights[l].t());
                    for (v, a) in back.iter_mut().zip(acts[l].iter()) {
                        *v *= activate_prime(params.activation, *a);
                    }
                    delta = back;
                }
            }
            opt.step(&mut model, &grads_w, &grads_b);
        }

        let loss = epoch_loss / n_batches;
        if loss > best - params.tol {
            stall += 1;
        } else {
            stall = 0;
        }
        best = best.min(loss);
        if stall > params.n_iter_no_change {
            if params.solver == MlpSolver::Sgd && params.learning_rate == MlpSchedule::Adaptive {
                opt.lr /= 5.0;
                stall = 0;
                if opt.lr < 1e-6 {
                    break;
                }
            } else {
                break;
            }
        }
    }

    if model.weights.iter().any(|w| w.iter().any(|v| !v.is_finite()))
        || model.biases.iter().any(|b| b.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::Numeric("network weights diverged".into()));
    }
    Ok(ModelParams::Mlp(model))
}
