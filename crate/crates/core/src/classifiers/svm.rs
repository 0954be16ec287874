//! Linear L1-hinge SVM solved by dual coordinate descent.
//!
//! The bias is folded in as a constant feature equal to one, so it is
//! regularized together with `w`. Minimizes
//! `0.5 |(w, b)|² + C Σ max(0, 1 - y (w·x + b))` with `y ∈ {-1, +1}`.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, SplitRole};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub max_epochs: usize,
    pub tol: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, max_epochs: 100, tol: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

impl SvmModel {
    pub fn decision(&self, row: &[f32]) -> f64 {
        dot(&self.weights, row) + self.bias
    }

    /// 1 iff the decision value is non-negative.
    pub fn predict_row(&self, row: &[f32]) -> u8 {
        u8::from(self.decision(row) >= 0.0)
    }
}

fn dot(w: &[f64], x: &[f32]) -> f64 {
    w.iter().zip(x).map(|(&a, &b)| a * f64::from(b)).sum()
}

fn signed(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Dual solution and solver diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmFit {
    pub model: SvmModel,
    pub alpha: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
    /// Largest projected-gradient magnitude at the returned solution.
    pub max_violation: f64,
}

/// Projected gradient of the dual at `alpha_i` given `G = y f(x) - 1`.
fn projected_gradient(g: f64, alpha: f64, c: f64) -> f64 {
    if alpha <= 0.0 {
        g.min(0.0)
    } else if alpha >= c {
        g.max(0.0)
    } else {
        g
    }
}

/// Primal objective of `model` on `train`.
pub fn primal_objective(train: &FeatureMatrix, model: &SvmModel) -> f64 {
    let reg = 0.5 * (model.weights.iter().map(|w| w * w).sum::<f64>() + model.bias * model.bias);
    let hinge: f64 = train.rows().zip(train.labels()).map(|(row, &l)| (1.0 - signed(l) * model.decision(row)).max(0.0)).sum();
    reg + model.c * hinge
}

/// Cycles over samples in a fresh seeded permutation each epoch, solving each
/// one-variable subproblem in closed form under `0 <= alpha <= C`. Stops once
/// the largest projected-gradient magnitude over all samples is below `tol`.
pub fn fit_svm(train: &FeatureMatrix, params: &SvmParams, seed: u64) -> Result<SvmFit> {
    debug_assert_ne!(train.role(), SplitRole::Test, "svm fitted on test rows");
    let n = train.n_samples();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, actual: n });
    }
    let positives = train.count_label(1);
    if positives == 0 || positives == n {
        return Err(Error::SingleClass);
    }
    if !(params.c > 0.0) {
        return Err(Error::InvalidParameter("SVM needs C > 0".into()));
    }
    let c = params.c;
    let d = train.n_features();
    let y: Vec<f64> = train.labels().iter().map(|&l| signed(l)).collect();
    let q_diag: Vec<f64> = train.rows().map(|r| r.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>() + 1.0).collect();

    let mut w = vec![0.0f64; d];
    let mut b = 0.0f64;
    let mut alpha = vec![0.0f64; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let violation = |w: &[f64], b: f64, alpha: &[f64]| {
        train
            .rows()
            .enumerate()
            .map(|(i, row)| projected_gradient(y[i] * (dot(w, row) + b) - 1.0, alpha[i], c).abs())
            .fold(0.0f64, f64::max)
    };

    let mut epochs = 0;
    let mut max_violation = violation(&w, b, &alpha);
    let mut converged = max_violation < params.tol;
    while !converged && epochs < params.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let row = train.row(i);
            let g = y[i] * (dot(&w, row) + b) - 1.0;
            if projected_gradient(g, alpha[i], c) == 0.0 {
                continue;
            }
            let old = alpha[i];
            let new = (old - g / q_diag[i]).clamp(0.0, c);
            let delta = (new - old) * y[i];
            if delta != 0.0 {
                alpha[i] = new;
                for (wj, &x) in w.iter_mut().zip(row) {
                    *wj += delta * f64::from(x);
                }
                b += delta;
            }
        }
        epochs += 1;
        max_violation = violation(&w, b, &alpha);
        converged = max_violation < params.tol;
    }
    Ok(SvmFit { model: SvmModel { weights: w, bias: b, c }, alpha, epochs, converged, max_violation })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hard_margin_pair() {
        let m = FeatureMatrix::new(2, 1, vec![-1.0, 1.0], vec![0, 1]).unwrap();
        let fit = fit_svm(&m, &SvmParams { c: 100.0, ..Default::default() }, 0).unwrap();
        assert!((fit.model.weights[0] - 1.0).abs() <= 1e-3);
        assert!(fit.model.bias.abs() <= 1e-3);
        for (row, &l) in m.rows().zip(m.labels()) {
            assert!(signed(l) * fit.model.decision(row) >= 1.0 - 1e-3);
        }
        assert!(fit.converged);
    }

    #[test]
    fn single_class_is_rejected() {
        let m = FeatureMatrix::new(2, 1, vec![-1.0, 1.0], vec![1, 1]).unwrap();
        assert_eq!(fit_svm(&m, &SvmParams::default(), 0), Err(Error::SingleClass));
    }

    #[test]
    fn projected_gradient_cases() {
        assert_eq!(projected_gradient(0.5, 0.0, 1.0), 0.0);
        assert_eq!(projected_gradient(-0.5, 0.0, 1.0), -0.5);
        assert_eq!(projected_gradient(-0.5, 1.0, 1.0), 0.0);
        assert_eq!(projected_gradient(0.5, 1.0, 1.0), 0.5);
        assert_eq!(projected_gradient(0.25, 0.5, 1.0), 0.25);
    }
}
