//! Bounding-box regression.
//!
//! Targets use the scale-invariant center/log-size parameterization:
//! `tx = (Gx - Px) / Pw`, `ty = (Gy - Py) / Ph`, `tw = ln(Gw / Pw)`,
//! `th = ln(Gh / Ph)`. Each of the four targets gets an independent ridge
//! regression `min (1/N) Σ (t - w·x - b)² + λ ‖w‖²` with an unregularized
//! bias, solved exactly through the normal equations of the centered data.
//! The primal `D × D` system is used when `D ≤ N`, otherwise the dual
//! `N × N` system.

use alloc::vec::Vec;

use crate::boxes::BBox;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, dot};

pub type BoxDelta = [f64; 4];

pub fn box_targets(proposal: &BBox, gt: &BBox) -> Result<BoxDelta> {
    proposal.validate()?;
    gt.validate()?;
    let (px, py) = proposal.center();
    let (pw, ph) = (proposal.width(), proposal.height());
    let (gx, gy) = gt.center();
    let (gw, gh) = (gt.width(), gt.height());
    Ok([
        (gx - px) / pw,
        (gy - py) / ph,
        libm::log(gw / pw),
        libm::log(gh / ph),
    ])
}

/// Inverse of [`box_targets`].
pub fn apply_transform(proposal: &BBox, delta: &BoxDelta) -> Result<BBox> {
    proposal.validate()?;
    let (px, py) = proposal.center();
    let (pw, ph) = (proposal.width(), proposal.height());
    let out = BBox::from_center(
        px + pw * delta[0],
        py + ph * delta[1],
        pw * libm::exp(delta[2]),
        ph * libm::exp(delta[3]),
    );
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegressor {
    /// One `D`-vector per target (tx, ty, tw, th).
    pub weights: [Vec<f64>; 4],
    pub biases: [f64; 4],
    pub ridge_lambda: f64,
    pub class_id: u32,
}

impl BoxRegressor {
    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<BoxDelta> {
        if x.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(core::array::from_fn(|k| dot(&self.weights[k], x) + self.biases[k]))
    }

    /// Refined box for `proposal` with features `x`.
    pub fn refine(&self, proposal: &BBox, x: &[f64]) -> Result<BBox> {
        apply_transform(proposal, &self.predict(x)?)
    }

    /// Ridge objective of target `k` on the given data.
    pub fn objective(&self, k: usize, xs: &[Vec<f64>], targets: &[BoxDelta]) -> f64 {
        let sse: f64 = xs
            .iter()
            .zip(targets)
            .map(|(x, t)| {
                let r = t[k] - dot(&self.weights[k], x) - self.biases[k];
                r * r
            })
            .sum();
        sse / xs.len() as f64 + self.ridge_lambda * dot(&self.weights[k], &self.weights[k])
    }
}

pub fn train_regressor(
    xs: &[Vec<f64>],
    targets: &[BoxDelta],
    ridge_lambda: f64,
    class_id: u32,
) -> Result<BoxRegressor> {
    let n = xs.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if targets.len() != n {
        return Err(Error::Shape {
            expected: n,
            actual: targets.len(),
        });
    }
    if !(ridge_lambda > 0.0 && ridge_lambda.is_finite()) {
        return Err(Error::Domain("ridge_lambda must be positive"));
    }
    let d = xs[0].len();
    if let Some(x) = xs.iter().find(|x| x.len() != d) {
        return Err(Error::Shape {
            expected: d,
            actual: x.len(),
        });
    }
    if targets.iter().flatten().any(|t| !t.is_finite()) {
        return Err(Error::Domain("regression targets must be finite"));
    }

    let nf = n as f64;
    let mut x_mean = alloc::vec![0.0; d];
    for x in xs {
        for (m, v) in x_mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in &mut x_mean {
        *m /= nf;
    }
    let t_mean: [f64; 4] = core::array::from_fn(|k| targets.iter().map(|t| t[k]).sum::<f64>() / nf);
    let xc: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| x.iter().zip(&x_mean).map(|(v, m)| v - m).collect())
        .collect();
    let tc: Vec<[f64; 4]> = targets
        .iter()
        .map(|t| core::array::from_fn(|k| t[k] - t_mean[k]))
        .collect();

    let weights: [Vec<f64>; 4] = if d <= n {
        // (XᵀX/N + λI) w = Xᵀt/N
        let mut gram = alloc::vec![0.0; d * d];
        for x in &xc {
            for i in 0..d {
                let xi = x[i];
                if xi == 0.0 {
                    continue;
                }
                for j in 0..=i {
                    gram[i * d + j] += xi * x[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..=i {
                gram[i * d + j] /= nf;
                gram[j * d + i] = gram[i * d + j];
            }
            gram[i * d + i] += ridge_lambda;
        }
        cholesky(&mut gram, d)?;
        core::array::from_fn(|k| {
            let mut rhs = alloc::vec![0.0; d];
            for (x, t) in xc.iter().zip(&tc) {
                for (r, v) in rhs.iter_mut().zip(x) {
                    *r += v * t[k];
                }
            }
            for r in &mut rhs {
                *r /= nf;
            }
            cholesky_solve(&gram, d, &rhs)
        })
    } else {
        // w = Xᵀ α with (XXᵀ/N + λI) α = t/N
        let mut kernel = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = dot(&xc[i], &xc[j]) / nf;
                kernel[i * n + j] = v;
                kernel[j * n + i] = v;
            }
            kernel[i * n + i] += ridge_lambda;
        }
        cholesky(&mut kernel, n)?;
        core::array::from_fn(|k| {
            let rhs: Vec<f64> = tc.iter().map(|t| t[k] / nf).collect();
            let alpha = cholesky_solve(&kernel, n, &rhs);
            let mut w = alloc::vec![0.0; d];
            for (a, x) in alpha.iter().zip(&xc) {
                for (wj, v) in w.iter_mut().zip(x) {
                    *wj += a * v;
                }
            }
            w
        })
    };
    let biases: [f64; 4] = core::array::from_fn(|k| t_mean[k] - dot(&weights[k], &x_mean));
    if weights.iter().flatten().any(|w| !w.is_finite()) {
        return Err(Error::Numerical("ridge solve produced non-finite weights"));
    }
    Ok(BoxRegressor {
        weights,
        biases,
        ridge_lambda,
        class_id,
    })
}
