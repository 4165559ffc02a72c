//! Principal components by power iteration with deflation.
//!
//! The covariance matrix is never formed: each iteration multiplies by the
//! centered data and its transpose, so memory stays `O(N·D)` even for
//! full-size pooled features.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

const TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 10_000;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Shape {
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// `N × k` scores of the centered data.
    pub projections: Matrix,
    /// `k × D`, orthonormal rows.
    pub basis: Matrix,
    /// Top-`k` sample-covariance eigenvalues, descending.
    pub variances: Vec<f64>,
    pub mean: Vec<f64>,
}

/// Projects the rows of `vectors` onto their top `components` principal
/// axes. Covariance uses the `N - 1` divisor.
pub fn pca_project(vectors: &Matrix, components: usize) -> Result<PcaResult> {
    let (n, d) = (vectors.rows(), vectors.cols());
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if components == 0 || components > d {
        return Err(Error::Domain("component count must lie in 1..=D"));
    }
    if vectors.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("PCA input must be finite"));
    }

    let mut mean = alloc::vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(vectors.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered: Vec<f64> = (0..n)
        .flat_map(|i| vectors.row(i).iter().zip(&mean).map(|(v, m)| v - m))
        .collect();
    let denom = (n - 1) as f64;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(components);
    let mut variances = Vec::with_capacity(components);
    let mut scores = alloc::vec![0.0; n];
    for k in 0..components {
        let mut v: Vec<f64> = (0..d)
            .map(|j| 1.0 + (j as f64 + 1.0) / (d as f64 + k as f64 + 1.0))
            .collect();
        deflate(&mut v, &basis);
        if !normalize(&mut v) {
            return Err(Error::Numerical("power iteration start vector vanished"));
        }
        let mut lambda = 0.0f64;
        for _ in 0..MAX_ITERATIONS {
            // w = Xᵀ X v / (n - 1), restricted to the complement of found axes
            for (i, s) in scores.iter_mut().enumerate() {
                *s = dot(&centered[i * d..(i + 1) * d], &v);
            }
            let mut w = alloc::vec![0.0; d];
            for (i, &s) in scores.iter().enumerate() {
                for (wj, xj) in w.iter_mut().zip(&centered[i * d..(i + 1) * d]) {
                    *wj += s * xj;
                }
            }
            for wj in &mut w {
                *wj /= denom;
            }
            deflate(&mut w, &basis);
            let next = dot(&w, &v);
            let done = (next - lambda).abs() <= TOLERANCE * next.abs().max(1e-300);
            lambda = next;
            if !normalize(&mut w) {
                // remaining variance is exactly zero: any orthogonal axis works
                lambda = 0.0;
                break;
            }
            v = w;
            if done {
                break;
            }
        }
        deflate(&mut v, &basis);
        normalize(&mut v);
        fix_sign(&mut v);
        basis.push(v);
        variances.push(lambda.max(0.0));
    }

    let mut proj = Vec::with_capacity(n * components);
    for i in 0..n {
        let row = &centered[i * d..(i + 1) * d];
        for b in &basis {
            proj.push(dot(row, b));
        }
    }
    Ok(PcaResult {
        projections: Matrix::new(n, components, proj)?,
        basis: Matrix::new(components, d, basis.concat())?,
        variances,
        mean,
    })
}

fn deflate(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= c * y;
        }
    }
}

fn normalize(v: &mut [f64]) -> bool {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    true
}

/// Largest-magnitude coordinate made positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (j, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = j;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}
