//! The probability simplex and its full-dimensional "solid" chart.
//!
//! A portfolio `w` lives on the simplex in `R^d`. Newton-type methods need an
//! open domain, so every solver works on `v in R^(d-1)` through the affine map
//! `w = A v + e_d`, where `A = [I_{d-1}; -1^T]`. The matrix is never stored:
//! `A v` appends `1 - sum(v)`, `A^T g` subtracts the last entry, and the left
//! pseudoinverse applied to `w - e_d` drops the last coordinate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the coordinate sum of a portfolio.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Portfolio(Vec<f64>);

impl Portfolio {
    /// Validates nonnegativity and the unit sum (within [`SIMPLEX_TOL`]).
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::UnsupportedDimension {
                d: weights.len(),
                reason: "portfolios need at least two assets",
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::BoundaryPoint);
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidParameter(format!(
                "portfolio weights sum to {sum}, not 1"
            )));
        }
        Ok(Portfolio(weights))
    }

    /// Clamps negatives to zero and renormalizes. Only for data entering the
    /// system from outside; the solvers never call it.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        for w in weights.iter_mut() {
            if !w.is_finite() {
                return Err(Error::BoundaryPoint);
            }
            *w = w.max(0.0);
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::BoundaryPoint);
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Portfolio::new(weights)
    }

    pub fn uniform(d: usize) -> Self {
        Portfolio(vec![1.0 / d as f64; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&w| w > 0.0)
    }

    pub fn min_entry(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `x^T w`, the wealth factor earned in one round.
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(w, x)| w * x).sum()
    }

    pub fn max_abs_diff(&self, other: &Portfolio) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A point of the solid simplex `{v >= 0, sum(v) <= 1}` in `R^(d-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReparamPoint(Vec<f64>);

impl ReparamPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        ReparamPoint(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        ReparamPoint(v.iter().copied().collect())
    }

    /// Open-domain membership: all entries positive and their sum below one.
    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&c| c > 0.0) && self.0.iter().sum::<f64>() < 1.0
    }
}

/// `w = A v + e_d`.
pub fn to_simplex(v: &ReparamPoint) -> Portfolio {
    let mut w = v.0.clone();
    let last = 1.0 - v.0.iter().sum::<f64>();
    w.push(last);
    Portfolio(w)
}

/// `v = A^+ (w - e_d)`.
pub fn to_solid(w: &Portfolio) -> ReparamPoint {
    let d = w.dim();
    ReparamPoint(w.0[..d - 1].to_vec())
}

/// `A^T g`: entries `g[i] - g[d-1]`.
pub fn reparam_gradient(g: &[f64]) -> DVector<f64> {
    let d = g.len();
    let last = g[d - 1];
    DVector::from_iterator(d - 1, g[..d - 1].iter().map(|gi| gi - last))
}

/// `A^T H A` for a symmetric `d x d` matrix `H`.
pub fn reparam_hessian(h: &DMatrix<f64>) -> DMatrix<f64> {
    let d = h.nrows();
    let m = d - 1;
    let hdd = h[(d - 1, d - 1)];
    DMatrix::from_fn(m, m, |i, j| h[(i, j)] - h[(i, d - 1)] - h[(d - 1, j)] + hdd)
}

/// `A u` for a direction `u` in `R^(d-1)`: the corresponding simplex-tangent
/// direction in `R^d`.
pub fn lift_direction(u: &DVector<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = u.iter().copied().collect();
    out.push(-u.sum());
    out
}
