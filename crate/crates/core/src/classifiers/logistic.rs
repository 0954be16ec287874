//! L2-regularized logistic regression trained by full-batch gradient descent.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, SplitRole};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrParams {
    pub lambda: f64,
    pub learning_rate: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for LrParams {
    fn default() -> Self {
        Self { lambda: 1e-4, learning_rate: 0.1, max_iters: 500, tol: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LrModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
}

impl LrModel {
    pub fn decision(&self, row: &[f32]) -> f64 {
        dot(&self.weights, row) + self.bias
    }

    pub fn probability(&self, row: &[f32]) -> f64 {
        sigmoid(self.decision(row))
    }

    /// 1 iff the probability is at least 0.5.
    pub fn predict_row(&self, row: &[f32]) -> u8 {
        u8::from(self.decision(row) >= 0.0)
    }
}

fn dot(w: &[f64], x: &[f32]) -> f64 {
    w.iter().zip(x).map(|(&a, &b)| a * f64::from(b)).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + libm::log1p(libm::exp(-t.abs()))
}

/// Objective value and gradient at `(w, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    pub grad_w: Vec<f64>,
    pub grad_b: f64,
}

/// Mean log-loss plus `(lambda / 2) |w|²`; the bias is not regularized.
pub fn loss_and_gradient(train: &FeatureMatrix, w: &[f64], b: f64, lambda: f64) -> LossGradient {
    let (data_loss, mut grad_w, grad_b) = data_term(train, w, b);
    let mut loss = data_loss;
    for (g, &wi) in grad_w.iter_mut().zip(w) {
        *g += lambda * wi;
        loss += 0.5 * lambda * wi * wi;
    }
    LossGradient { loss, grad_w, grad_b }
}

/// Mean log-loss and its gradient, without the penalty.
fn data_term(train: &FeatureMatrix, w: &[f64], b: f64) -> (f64, Vec<f64>, f64) {
    let n = train.n_samples() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; w.len()];
    let mut grad_b = 0.0;
    for (row, &y) in train.rows().zip(train.labels()) {
        let z = dot(w, row) + b;
        loss += if y == 1 { softplus(-z) } else { softplus(z) };
        let r = sigmoid(z) - f64::from(y);
        for (g, &x) in grad_w.iter_mut().zip(row) {
            *g += r * f64::from(x);
        }
        grad_b += r;
    }
    for g in &mut grad_w {
        *g /= n;
    }
    (loss / n, grad_w, grad_b / n)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrFitInfo {
    pub iterations: usize,
    pub converged: bool,
    pub final_loss: f64,
}

/// Gradient descent from zero. The log-loss takes an explicit step and the
/// ridge penalty an implicit (proximal) one, `w <- (w - lr g) / (1 + lr lambda)`,
/// which has the same fixed points and stays stable for large `lambda`.
/// Stops when the full gradient's infinity norm drops below `tol`.
pub fn fit_lr(train: &FeatureMatrix, params: &LrParams) -> Result<(LrModel, LrFitInfo)> {
    debug_assert_ne!(train.role(), SplitRole::Test, "logistic regression fitted on test rows");
    if train.n_samples() < 2 {
        return Err(Error::TooFewSamples { needed: 2, actual: train.n_samples() });
    }
    if !(params.lambda >= 0.0) || !(params.learning_rate > 0.0) {
        return Err(Error::InvalidParameter("logistic regression needs lambda >= 0 and learning rate > 0".into()));
    }
    let d = train.n_features();
    let mut w = vec![0.0f64; d];
    let mut b = 0.0f64;
    let lr = params.learning_rate;
    let shrink = 1.0 / (1.0 + lr * params.lambda);
    let mut info = LrFitInfo { iterations: 0, converged: false, final_loss: f64::NAN };
    for it in 0..=params.max_iters {
        let (data_loss, grad, grad_b) = data_term(train, &w, b);
        let penalty: f64 = w.iter().map(|v| v * v).sum::<f64>() * 0.5 * params.lambda;
        let loss = data_loss + penalty;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: it });
        }
        info.final_loss = loss;
        info.iterations = it;
        let norm = grad.iter().zip(&w).map(|(g, wi)| (g + params.lambda * wi).abs()).fold(grad_b.abs(), f64::max);
        if norm < params.tol {
            info.converged = true;
            break;
        }
        if it == params.max_iters {
            break;
        }
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi = (*wi - lr * g) * shrink;
        }
        b -= lr * grad_b;
    }
    Ok((LrModel { weights: w, bias: b, lambda: params.lambda }, info))
}
