//! Potentials of the regularized log-loss game and their leverage-score
//! calculus.
//!
//! The barrier `lambda * R(w) = -lambda * sum_i log w[i]` is folded into the
//! loss history as `d` extra "fictional" rounds `x_{-i} = e_i`, each with
//! weight `lambda`. Together with the observed rounds (weight 1) they form the
//! extended term set, and everything below is a sum over it:
//!
//! * `H_t(w) = sum_k lambda_k g_k g_k^T` with `g_k = A^T grad loss_k(w)`,
//! * leverage `pi_k = lambda_k |g_k|^2_{H^-1}`, Gram entries
//!   `pi_{k,j} = sqrt(lambda_k lambda_j) <g_k, g_j>_{H^-1}`,
//! * `V_t = 1/2 log det H_t`, `grad V_t = sum_k pi_k g_k`,
//! * `Q_t = sum_k pi_k g_k g_k^T` and `hess V_t = 3 Q_t - 2 S_t` with
//!   `S_t = sum_{k,j} pi_{k,j}^2 g_k g_j^T`.
//!
//! All vectors and matrices here are in the `(d-1)`-dimensional chart.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{to_simplex, Portfolio, ReparamPoint};

/// Size cap (number of extended terms) for the quadratic-cost Hessian formula.
pub const EXACT_HESSIAN_TERM_CAP: usize = 200;

/// `-log(x^T w)`.
pub fn loss(x: &[f64], w: &Portfolio) -> Result<f64> {
    let wealth = w.dot(x);
    if wealth <= 0.0 || !wealth.is_finite() {
        return Err(Error::NonpositiveWealth(wealth));
    }
    Ok(-wealth.ln())
}

/// Checks that a return vector is a valid market round for `d` assets.
pub fn validate_return(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidReturn(format!(
            "entry {bad} is negative or not finite"
        )));
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidReturn("all entries are zero".into()));
    }
    Ok(())
}

/// Observed returns plus the barrier weight `lambda`.
///
/// `lambda = 0` is accepted for the quadrature reference; Hessian-based
/// quantities then need enough data to be nondegenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    d: usize,
    lambda: f64,
    returns: Vec<Vec<f64>>,
}

impl LossHistory {
    pub fn new(d: usize, lambda: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::UnsupportedDimension {
                d,
                reason: "at least two assets are required",
            });
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "barrier weight must be nonnegative, got {lambda}"
            )));
        }
        Ok(LossHistory {
            d,
            lambda,
            returns: Vec::new(),
        })
    }

    pub fn with_returns(d: usize, lambda: f64, returns: &[Vec<f64>]) -> Result<Self> {
        let mut h = LossHistory::new(d, lambda)?;
        for x in returns {
            h.push(x.clone())?;
        }
        Ok(h)
    }

    pub fn push(&mut self, x: Vec<f64>) -> Result<()> {
        validate_return(&x, self.d)?;
        self.returns.push(x);
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of observed rounds `t`.
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn returns(&self) -> &[Vec<f64>] {
        &self.returns
    }

    /// The first `t` rounds with the same barrier weight.
    pub fn prefix(&self, t: usize) -> LossHistory {
        LossHistory {
            d: self.d,
            lambda: self.lambda,
            returns: self.returns[..t].to_vec(),
        }
    }

    /// Number of extended terms `t + d`.
    pub fn term_count(&self) -> usize {
        self.returns.len() + self.d
    }
}

/// Index into the extended term set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    /// Observed round `tau`, 1-based.
    Round(usize),
    /// Barrier term for asset `i`, 1-based.
    Barrier(usize),
}

/// Regularization weights and solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub lambda: f64,
    pub mu: f64,
    /// Quasi-Newton steps per round.
    pub steps: usize,
    /// Newton-decrement stopping tolerance of the exact solver.
    pub decrement_tol: f64,
    pub max_iterations: usize,
    /// Stop the quasi-Newton loop early once the model decrement falls below
    /// this value. `None` runs exactly `steps` iterations.
    pub qn_early_exit: Option<f64>,
}

impl HyperParams {
    pub fn new(lambda: f64, mu: f64) -> Self {
        HyperParams {
            lambda,
            mu,
            steps: 1,
            decrement_tol: 1e-10,
            max_iterations: 500,
            qn_early_exit: None,
        }
    }

    /// `lambda = 16, mu = 7`.
    pub fn exact_preset() -> Self {
        HyperParams::new(16.0, 7.0)
    }

    /// `lambda = 560, mu = 2, S = 18 ceil(log(T + d + 164)) + 7`.
    pub fn quasi_newton_preset(horizon: usize, d: usize) -> Self {
        HyperParams {
            steps: quasi_newton_preset_steps(horizon, d),
            ..HyperParams::new(560.0, 2.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mu must be nonnegative, got {}",
                self.mu
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be >= 1".into()));
        }
        if !(self.decrement_tol > 0.0) {
            return Err(Error::InvalidParameter("decrement_tol must be > 0".into()));
        }
        Ok(())
    }

    /// `(1/lambda)(1 + 2mu/lambda)^2 <= min{cap, 5mu/(8(1+lambda))}` and
    /// `lambda >= 2e`; `cap = 1/4` for the exact update.
    pub fn satisfies_exact_condition(&self) -> bool {
        self.parameter_condition(0.25)
    }

    /// Same with `cap = 1/556`, plus [`Self::has_enough_steps`].
    pub fn satisfies_quasi_newton_condition(&self, horizon: usize, d: usize) -> bool {
        self.parameter_condition(1.0 / 556.0) && self.has_enough_steps(horizon, d)
    }

    /// `S >= 9 log(2 max{(T+d+1)^2, 1e4 sqrt(1+3mu)})`.
    pub fn has_enough_steps(&self, horizon: usize, d: usize) -> bool {
        let needed = 9.0
            * (2.0
                * ((horizon + d + 1) as f64)
                    .powi(2)
                    .max(1e4 * (1.0 + 3.0 * self.mu).sqrt()))
            .ln();
        self.steps as f64 >= needed
    }

    fn parameter_condition(&self, cap: f64) -> bool {
        let (l, m) = (self.lambda, self.mu);
        let lhs = (1.0 + 2.0 * m / l).powi(2) / l;
        let rhs = cap.min(5.0 * m / (8.0 * (1.0 + l)));
        l >= 2.0 * std::f64::consts::E && m > 0.0 && lhs <= rhs
    }
}

pub fn quasi_newton_preset_steps(horizon: usize, d: usize) -> usize {
    18 * ((horizon + d + 164) as f64).ln().ceil() as usize + 7
}

/// `L_t(w) = sum_tau loss_tau(w) + lambda R(w)`.
pub fn cumulative_potential_l(h: &LossHistory, w: &Portfolio) -> Result<f64> {
    if w.dim() != h.d() {
        return Err(Error::DimensionMismatch {
            expected: h.d(),
            got: w.dim(),
        });
    }
    if !w.is_interior() {
        return Err(Error::BoundaryPoint);
    }
    let mut total = -h.lambda() * w.weights().iter().map(|wi| wi.ln()).sum::<f64>();
    for x in h.returns() {
        total += loss(x, w)?;
    }
    Ok(total)
}

/// Cached per-point quantities over the extended term set of a history.
///
/// Term `k < t` is round `k + 1`; term `t + i` is the barrier term of asset
/// `i + 1`.
#[derive(Debug, Clone)]
pub struct RoundState {
    w: Portfolio,
    rounds: usize,
    /// `lambda_k`.
    weights: Vec<f64>,
    /// `x_k^T w`.
    dots: Vec<f64>,
    /// Row `k` holds `g_k = A^T grad loss_k(w) = -A^T x_k / (x_k^T w)`.
    grads: DMatrix<f64>,
    hess: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    /// Column `k` holds `z_k = sqrt(lambda_k) L^-1 g_k`, so that
    /// `pi_{k,j} = z_k^T z_j`.
    whitened: DMatrix<f64>,
    leverage: Vec<f64>,
}

impl RoundState {
    /// Builds all cached quantities at an interior point.
    pub fn build(h: &LossHistory, w: &Portfolio) -> Result<Self> {
        let d = h.d();
        if w.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: w.dim(),
            });
        }
        if !w.is_interior() {
            return Err(Error::BoundaryPoint);
        }
        let t = h.len();
        let n = t + d;
        let m = d - 1;
        let wv = w.weights();

        let mut weights = Vec::with_capacity(n);
        let mut dots = Vec::with_capacity(n);
        let mut grads = DMatrix::zeros(n, m);
        for (k, x) in h.returns().iter().enumerate() {
            let dot = w.dot(x);
            if dot <= 0.0 || !dot.is_finite() {
                return Err(Error::NonpositiveWealth(dot));
            }
            let last = x[d - 1];
            for i in 0..m {
                grads[(k, i)] = -(x[i] - last) / dot;
            }
            weights.push(1.0);
            dots.push(dot);
        }
        for i in 0..d {
            let k = t + i;
            if i < m {
                grads[(k, i)] = -1.0 / wv[i];
            } else {
                for j in 0..m {
                    grads[(k, j)] = 1.0 / wv[i];
                }
            }
            weights.push(h.lambda());
            dots.push(wv[i]);
        }

        let mut scaled = grads.clone();
        for (k, lam) in weights.iter().enumerate() {
            let s = lam.sqrt();
            scaled.row_mut(k).scale_mut(s);
        }
        let hess = scaled.tr_mul(&scaled);
        let factor = Cholesky::new(hess.clone()).ok_or(Error::SingularHessian)?;
        let mut whitened = scaled.transpose();
        if !factor.l_dirty().solve_lower_triangular_mut(&mut whitened) {
            return Err(Error::SingularHessian);
        }
        let leverage = whitened.column_iter().map(|c| c.norm_squared()).collect();

        Ok(RoundState {
            w: w.clone(),
            rounds: t,
            weights,
            dots,
            grads,
            hess,
            factor,
            whitened,
            leverage,
        })
    }

    pub fn build_at(h: &LossHistory, v: &ReparamPoint) -> Result<Self> {
        if !v.is_interior() {
            return Err(Error::BoundaryPoint);
        }
        RoundState::build(h, &to_simplex(v))
    }

    pub fn portfolio(&self) -> &Portfolio {
        &self.w
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn term_count(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.grads.ncols()
    }

    /// Position of a term in the internal ordering.
    pub fn position(&self, term: Term) -> Result<usize> {
        let d = self.dim() + 1;
        match term {
            Term::Round(tau) if tau >= 1 && tau <= self.rounds => Ok(tau - 1),
            Term::Barrier(i) if i >= 1 && i <= d => Ok(self.rounds + i - 1),
            other => Err(Error::IndexOutOfRange(format!(
                "{other:?} with t = {} and d = {d}",
                self.rounds
            ))),
        }
    }

    pub fn term_at(&self, position: usize) -> Term {
        if position < self.rounds {
            Term::Round(position + 1)
        } else {
            Term::Barrier(position - self.rounds + 1)
        }
    }

    /// Reparametrized loss gradients, one row per term.
    pub fn grads(&self) -> &DMatrix<f64> {
        &self.grads
    }

    pub fn grad(&self, term: Term) -> Result<DVector<f64>> {
        let k = self.position(term)?;
        Ok(self.grads.row(k).transpose())
    }

    pub fn term_weights(&self) -> &[f64] {
        &self.weights
    }

    /// `x_k^T w` per term.
    pub fn wealth_factors(&self) -> &[f64] {
        &self.dots
    }

    pub fn hess(&self) -> &DMatrix<f64> {
        &self.hess
    }

    pub fn hess_factor(&self) -> &Cholesky<f64, Dyn> {
        &self.factor
    }

    /// Leverage scores in internal term order.
    pub fn leverage(&self) -> &[f64] {
        &self.leverage
    }

    pub fn leverage_of(&self, term: Term) -> Result<f64> {
        Ok(self.leverage[self.position(term)?])
    }

    /// `L_t(w)`.
    pub fn loss_value(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.dots)
            .map(|(lam, dot)| -lam * dot.ln())
            .sum()
    }

    /// Row `tau` of the Gram matrix, in internal term order.
    pub fn gram_row(&self, term: Term) -> Result<DVector<f64>> {
        let k = self.position(term)?;
        Ok(self.whitened.tr_mul(&self.whitened.column(k)))
    }

    /// The full Gram matrix (test and diagnostics use).
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        self.whitened.tr_mul(&self.whitened)
    }

    /// `V_t(w) = 1/2 log det H_t(w)`.
    pub fn volumetric_value(&self) -> f64 {
        let l = self.factor.l_dirty();
        (0..self.dim()).map(|i| l[(i, i)].ln()).sum()
    }

    /// `sum_k pi_k g_k`.
    pub fn volumetric_gradient(&self) -> DVector<f64> {
        self.grads
            .tr_mul(&DVector::from_column_slice(&self.leverage))
    }

    /// `sum_k (lambda_k + mu pi_k) g_k`, the gradient of `P_t` in the chart.
    pub fn potential_gradient(&self, mu: f64) -> DVector<f64> {
        let coef = DVector::from_iterator(
            self.weights.len(),
            self.weights
                .iter()
                .zip(&self.leverage)
                .map(|(lam, pi)| lam + mu * pi),
        );
        self.grads.tr_mul(&coef)
    }

    /// `L_t(w) + mu V_t(w)`.
    pub fn potential_value(&self, mu: f64) -> f64 {
        self.loss_value() + mu * self.volumetric_value()
    }

    /// `Q_t = sum_k pi_k g_k g_k^T`.
    pub fn hessian_model_q(&self) -> DMatrix<f64> {
        let mut scaled = self.grads.clone();
        for (k, pi) in self.leverage.iter().enumerate() {
            scaled.row_mut(k).scale_mut(pi.max(0.0).sqrt());
        }
        scaled.tr_mul(&scaled)
    }

    /// `S_t = sum_{k,j} pi_{k,j}^2 g_k g_j^T`, computed without the Gram
    /// matrix: since `pi_{k,j}^2 = <z_k (x) z_k, z_j (x) z_j>`,
    /// `S = sum_{a<=b} c_ab u_ab u_ab^T` with `u_ab = sum_k z_k[a] z_k[b] g_k`
    /// (`c_ab = 2` off the diagonal). Cost `O((t+d) d^3 + d^4)`.
    pub fn gram_square_term(&self) -> DMatrix<f64> {
        let m = self.dim();
        let n = self.term_count();
        let pairs = m * (m + 1) / 2;
        // Row p of `coef` is z[a] * z[b] over terms for the p-th pair a <= b.
        let mut coef = DMatrix::zeros(pairs, n);
        let mut p = 0;
        for a in 0..m {
            for b in a..m {
                let scale = if a == b {
                    1.0
                } else {
                    std::f64::consts::SQRT_2
                };
                for k in 0..n {
                    coef[(p, k)] = scale * self.whitened[(a, k)] * self.whitened[(b, k)];
                }
                p += 1;
            }
        }
        let u = coef * &self.grads;
        u.tr_mul(&u)
    }

    /// Exact Hessian of `V_t` in the chart, `3Q - 2S`, using the factored `S`.
    pub fn volumetric_hessian(&self) -> DMatrix<f64> {
        self.hessian_model_q() * 3.0 - self.gram_square_term() * 2.0
    }

    /// Exact Hessian of `V_t` by the direct double sum over term pairs.
    /// Quadratic in the number of terms; refuses instances over
    /// [`EXACT_HESSIAN_TERM_CAP`] terms.
    pub fn exact_volumetric_hessian(&self) -> Result<DMatrix<f64>> {
        let n = self.term_count();
        if n > EXACT_HESSIAN_TERM_CAP {
            return Err(Error::InstanceTooLarge {
                terms: n,
                cap: EXACT_HESSIAN_TERM_CAP,
            });
        }
        let m = self.dim();
        let gram = self.gram_matrix();
        let mut s = DMatrix::zeros(m, m);
        for k in 0..n {
            let gk = self.grads.row(k);
            for j in 0..n {
                let c = gram[(k, j)] * gram[(k, j)];
                let gj = self.grads.row(j);
                for a in 0..m {
                    for b in 0..m {
                        s[(a, b)] += c * gk[a] * gj[b];
                    }
                }
            }
        }
        Ok(self.hessian_model_q() * 3.0 - s * 2.0)
    }

    /// `A^T grad pi_tau = 2 pi_tau g_tau - 2 sum_j pi_{tau,j}^2 g_j`.
    pub fn leverage_gradient(&self, term: Term) -> Result<DVector<f64>> {
        let k = self.position(term)?;
        let row = self.gram_row(term)?;
        let sq = row.map(|p| p * p);
        let mut out = self.grads.tr_mul(&sq) * -2.0;
        out.axpy(2.0 * self.leverage[k], &self.grads.row(k).transpose(), 1.0);
        Ok(out)
    }

    /// `|u|^2` in the `H^-1` metric.
    pub fn inverse_metric_sq(&self, u: &DVector<f64>) -> f64 {
        let mut y = u.clone();
        self.factor.l_dirty().solve_lower_triangular_mut(&mut y);
        y.norm_squared()
    }

    /// `|u|^2` in the `H` metric.
    pub fn metric_sq(&self, u: &DVector<f64>) -> f64 {
        u.dot(&(&self.hess * u))
    }
}

/// Volumetric increment of a new round at a fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainTerm {
    /// `mu (V_{t-1}(w) - V_t(w)) = (mu/2) log(1 - pi_hat)`.
    pub gain: f64,
    /// Leverage of the new round in the updated Hessian `H_t(w)`.
    pub leverage: f64,
}

/// `Gain_t` at the point of `prev` (built over rounds `1..t-1`) when round
/// `x_t` is appended. Uses `pi_hat = q / (1 + q)` with `q = |g_t|^2` in the
/// `H_{t-1}^{-1}` metric, so no second factorization is needed.
pub fn gain_term(prev: &RoundState, x: &[f64], mu: f64) -> Result<GainTerm> {
    let d = prev.dim() + 1;
    validate_return(x, d)?;
    let dot = prev.portfolio().dot(x);
    if dot <= 0.0 {
        return Err(Error::NonpositiveWealth(dot));
    }
    let last = x[d - 1];
    let g = DVector::from_iterator(d - 1, x[..d - 1].iter().map(|xi| -(xi - last) / dot));
    let q = prev.inverse_metric_sq(&g);
    let leverage = q / (1.0 + q);
    if !q.is_finite() || leverage >= 1.0 {
        return Err(Error::DegenerateLeverage(leverage));
    }
    Ok(GainTerm {
        gain: -0.5 * mu * q.ln_1p(),
        leverage,
    })
}

/// `P_t(w) = L_t(w) + mu V_t(w)`.
pub fn potential_p(h: &LossHistory, params: &HyperParams, w: &Portfolio) -> Result<f64> {
    Ok(RoundState::build(h, w)?.potential_value(params.mu))
}

/// Chart gradient of `P_t` at `w`.
pub fn potential_p_gradient(
    h: &LossHistory,
    params: &HyperParams,
    w: &Portfolio,
) -> Result<DVector<f64>> {
    Ok(RoundState::build(h, w)?.potential_gradient(params.mu))
}

/// `P_t(a) - P_t(b)` evaluated termwise, so that the result keeps full
/// relative precision when the two points are close.
pub fn potential_difference(a: &RoundState, b: &RoundState, mu: f64) -> f64 {
    let loss_diff: f64 = a
        .term_weights()
        .iter()
        .zip(a.wealth_factors().iter().zip(b.wealth_factors()))
        .map(|(lam, (da, db))| lam * ((db - da) / da).ln_1p())
        .sum();
    loss_diff + mu * (a.volumetric_value() - b.volumetric_value())
}
