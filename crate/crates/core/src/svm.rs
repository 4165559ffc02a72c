//! One-vs-rest linear SVM with L2 regularization and hinge loss.
//!
//! Training minimizes
//! `λ/2 ‖w‖² + (1/N) Σ c_i max(0, 1 - y_i (w·x_i + b))`
//! by stochastic subgradient steps `η_t = 1 / (λ (t + t0))` on `w` over a
//! seeded shuffle of the data, one pass per epoch. The bias is not
//! regularized, so it cannot take `w`'s step size (the steps are of order
//! `1/λ` early on and nothing pulls the bias back); inside an epoch it moves
//! by `1 / (t + t0)` and at every epoch end it is replaced by the exact
//! minimizer of the objective for the current `w`. The objectives of the
//! current iterate and of the running average of all iterates are then
//! evaluated and the best model seen so far is kept, so the returned
//! objective never increases between epochs.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::feature::{Dataset, FeatureMap};
use crate::linalg::dot;

const STEP_OFFSET: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub class_id: u32,
}

impl LinearModel {
    pub fn zeros(dim: usize, class_id: u32) -> Self {
        LinearModel {
            weights: alloc::vec![0.0; dim],
            bias: 0.0,
            class_id,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Decision value for a feature map flattened channel-major.
    pub fn score_map(&self, m: &FeatureMap) -> Result<f64> {
        if m.values().len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                actual: m.values().len(),
            });
        }
        Ok(m
            .values()
            .iter()
            .zip(&self.weights)
            .map(|(&x, w)| x as f64 * w)
            .sum::<f64>()
            + self.bias)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    pub reg_lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Multiplier on the hinge loss of positive samples.
    pub positive_weight: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            reg_lambda: 1e-4,
            epochs: 50,
            seed: 0,
            tolerance: 1e-6,
            positive_weight: 1.0,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reg_lambda > 0.0 && self.reg_lambda.is_finite()) {
            return Err(Error::Domain("reg_lambda must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::Domain("epochs must be >= 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Domain("tolerance must be positive"));
        }
        if !(self.positive_weight > 0.0 && self.positive_weight.is_finite()) {
            return Err(Error::Domain("positive_weight must be positive"));
        }
        Ok(())
    }
}

/// `w·x + b`.
pub fn score(model: &LinearModel, feature: &[f64]) -> Result<f64> {
    if feature.len() != model.dim() {
        return Err(Error::Shape {
            expected: model.dim(),
            actual: feature.len(),
        });
    }
    Ok(dot(&model.weights, feature) + model.bias)
}

fn check_data(model: &LinearModel, xs: &[Vec<f64>], ys: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if xs.len() != ys.len() {
        return Err(Error::Shape {
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    if let Some(x) = xs.iter().find(|x| x.len() != model.dim()) {
        return Err(Error::Shape {
            expected: model.dim(),
            actual: x.len(),
        });
    }
    if ys.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::Domain("labels must be -1 or +1"));
    }
    Ok(())
}

fn weighted_objective(
    w: &[f64],
    b: f64,
    xs: &[Vec<f64>],
    ys: &[f64],
    lambda: f64,
    positive_weight: f64,
) -> f64 {
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let c = if y > 0.0 { positive_weight } else { 1.0 };
            c * (1.0 - y * (dot(w, x) + b)).max(0.0)
        })
        .sum();
    0.5 * lambda * dot(w, w) + hinge / xs.len() as f64
}

/// Bias minimizing `Σ c_i max(0, 1 - y_i (s_i + b))` for fixed decision
/// values `s_i = w·x_i`.
///
/// The loss is convex and piecewise linear in `b` with kinks at
/// `b_i = y_i - s_i`; its slope starts at `-Σ_{y=+1} c_i` and every kink
/// raises it by `c_i`. The minimizer is the first kink where the slope
/// reaches zero.
fn optimal_bias(scores: &[f64], ys: &[f64], positive_weight: f64) -> f64 {
    let mut kinks: Vec<(f64, f64)> = scores
        .iter()
        .zip(ys)
        .map(|(s, &y)| (y - s, if y > 0.0 { positive_weight } else { 1.0 }))
        .collect();
    kinks.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    let mut slope: f64 = -ys
        .iter()
        .filter(|&&y| y > 0.0)
        .map(|_| positive_weight)
        .sum::<f64>();
    for (b, c) in kinks {
        slope += c;
        if slope >= 0.0 {
            return b;
        }
    }
    0.0
}

fn refit_bias(w: &[f64], xs: &[Vec<f64>], ys: &[f64], positive_weight: f64) -> f64 {
    let scores: Vec<f64> = xs.iter().map(|x| dot(w, x)).collect();
    optimal_bias(&scores, ys, positive_weight)
}

/// `λ/2 ‖w‖² + mean hinge loss`.
pub fn svm_objective(
    model: &LinearModel,
    xs: &[Vec<f64>],
    ys: &[f64],
    reg_lambda: f64,
) -> Result<f64> {
    check_data(model, xs, ys)?;
    Ok(weighted_objective(
        &model.weights,
        model.bias,
        xs,
        ys,
        reg_lambda,
        1.0,
    ))
}

/// Trains on explicit vectors with ±1 labels.
pub fn train_svm_vectors(
    xs: &[Vec<f64>],
    ys: &[f64],
    class_id: u32,
    cfg: &SvmConfig,
) -> Result<LinearModel> {
    cfg.validate()?;
    let dim = xs.first().map_or(0, Vec::len);
    let zero = LinearModel::zeros(dim, class_id);
    check_data(&zero, xs, ys)?;
    if !(ys.iter().any(|&y| y > 0.0) && ys.iter().any(|&y| y < 0.0)) {
        return Err(Error::DegenerateLabels);
    }

    let lambda = cfg.reg_lambda;
    let objective = |w: &[f64], b: f64| weighted_objective(w, b, xs, ys, lambda, cfg.positive_weight);

    let mut rng = crate::seeded_rng(cfg.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut w = alloc::vec![0.0; dim];
    let mut b = 0.0;
    let mut avg_w = alloc::vec![0.0; dim];
    let mut steps = 0usize;

    let mut best_w = w.clone();
    let mut best_b = 0.0;
    let mut best_obj = objective(&w, b);
    let mut prev_avg_obj = f64::INFINITY;
    // ‖w*‖ ≤ sqrt(2 · max_c / λ) since the zero model costs at most max_c
    let radius = libm::sqrt(2.0 * cfg.positive_weight.max(1.0) / lambda);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            steps += 1;
            let eta = 1.0 / (lambda * (steps as f64 + STEP_OFFSET));
            let (x, y) = (&xs[i], ys[i]);
            let margin = y * (dot(&w, x) + b);
            let shrink = 1.0 - eta * lambda;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            if margin < 1.0 {
                let c = if y > 0.0 { cfg.positive_weight } else { 1.0 };
                let g = eta * c * y;
                for (wj, xj) in w.iter_mut().zip(x) {
                    *wj += g * xj;
                }
                b += c * y / (steps as f64 + STEP_OFFSET);
            }
            let wn = libm::sqrt(dot(&w, &w));
            if wn > radius {
                let s = radius / wn;
                for wj in w.iter_mut() {
                    *wj *= s;
                }
            }
            let inv = 1.0 / steps as f64;
            for (a, wj) in avg_w.iter_mut().zip(&w) {
                *a += (wj - *a) * inv;
            }
        }

        b = refit_bias(&w, xs, ys, cfg.positive_weight);
        let avg_refit = refit_bias(&avg_w, xs, ys, cfg.positive_weight);
        let cur_obj = objective(&w, b);
        let avg_obj = objective(&avg_w, avg_refit);
        for (cw, cb, obj) in [(&w, b, cur_obj), (&avg_w, avg_refit, avg_obj)] {
            if obj < best_obj {
                best_obj = obj;
                best_w.clone_from(cw);
                best_b = cb;
            }
        }
        // the running average moves smoothly, unlike single SGD iterates
        if (prev_avg_obj - avg_obj).abs() < cfg.tolerance {
            break;
        }
        prev_avg_obj = avg_obj;
    }

    Ok(LinearModel {
        weights: best_w,
        bias: best_b,
        class_id,
    })
}

/// Class whose model scores `m` highest; ties go to the earlier model.
pub fn predict_class(models: &[LinearModel], m: &FeatureMap) -> Result<u32> {
    let mut best: Option<(u32, f64)> = None;
    for model in models {
        let s = model.score_map(m)?;
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((model.class_id, s));
        }
    }
    best.map(|(c, _)| c).ok_or(Error::EmptyInput)
}

/// Fraction of samples whose predicted class equals their label.
pub fn accuracy(models: &[LinearModel], d: &Dataset) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut correct = 0usize;
    for s in d.samples() {
        if predict_class(models, &s.feature)? == s.class_id {
            correct += 1;
        }
    }
    Ok(correct as f64 / d.len() as f64)
}

/// Flattened features and ±1 labels for the one-vs-rest problem of
/// `positive_class`.
pub fn one_vs_rest(d: &Dataset, positive_class: u32) -> (Vec<Vec<f64>>, Vec<f64>) {
    let xs = d.samples().iter().map(|s| s.feature.to_f64_vec()).collect();
    let ys = d
        .samples()
        .iter()
        .map(|s| if s.class_id == positive_class { 1.0 } else { -1.0 })
        .collect();
    (xs, ys)
}

/// One-vs-rest classifier for `positive_class` on flattened feature maps.
pub fn train_svm(d: &Dataset, positive_class: u32, cfg: &SvmConfig) -> Result<LinearModel> {
    if positive_class as usize >= d.num_classes() {
        return Err(Error::ClassId {
            class_id: positive_class,
            num_classes: d.num_classes(),
        });
    }
    let (xs, ys) = one_vs_rest(d, positive_class);
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    train_svm_vectors(&xs, &ys, positive_class, cfg)
}
