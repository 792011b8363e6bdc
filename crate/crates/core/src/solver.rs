//! Self-concordant minimization of the hybrid potential `P_t = L_t + mu V_t`
//! in the solid-simplex chart.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::barrier::{HyperParams, LossHistory, RoundState};
use crate::error::{Error, Result};
use crate::geometry::{to_simplex, to_solid, Portfolio, ReparamPoint};

/// Step halvings allowed before an iterate is declared to have left the domain.
pub const MAX_HALVINGS: usize = 60;

/// Self-concordance constant of `P^1` when `mu > 0`.
pub const VOLUMETRIC_SC_CONSTANT: f64 = 21.0;

/// `r - log(1 + r)`.
pub fn omega(r: f64) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::DomainError {
            function: "omega",
            value: r,
        });
    }
    Ok(r - r.ln_1p())
}

/// `-r - log(1 - r)`.
pub fn psi(r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::DomainError {
            function: "psi",
            value: r,
        });
    }
    Ok(-r - (-r).ln_1p())
}

/// `|grad|` in the metric of the inverse of the factored matrix.
pub fn newton_decrement(grad: &DVector<f64>, factor: &Cholesky<f64, Dyn>) -> f64 {
    let mut y = grad.clone();
    factor.l_dirty().solve_lower_triangular_mut(&mut y);
    y.norm()
}

/// Factors `hess` and returns the decrement of `grad`.
pub fn newton_decrement_dense(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Result<f64> {
    let factor = Cholesky::new(hess.clone()).ok_or(Error::SingularHessian)?;
    Ok(newton_decrement(grad, &factor))
}

/// `psi(M delta) / M^2`, an upper bound on `f(z) - min f` for an
/// `M`-self-concordant `f` with decrement `delta` at `z`.
pub fn suboptimality_certificate(decrement: f64, sc_constant: f64) -> Result<f64> {
    let r = sc_constant * decrement;
    if !(r < 1.0) {
        return Err(Error::CertificateUnavailable(r));
    }
    Ok(psi(r)? / (sc_constant * sc_constant))
}

/// Self-concordance constant used for damping.
///
/// `L^1` is `max(1, lambda^-1/2)`-self-concordant; adding the volumetric term
/// raises this by the factor 21.
pub fn sc_constant(params: &HyperParams) -> f64 {
    let base = params.lambda.powf(-0.5).max(1.0);
    if params.mu > 0.0 {
        VOLUMETRIC_SC_CONSTANT * base
    } else {
        base
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecrementCertificate {
    pub decrement: f64,
    pub sc_constant: f64,
    /// `None` when `sc_constant * decrement >= 1`.
    pub suboptimality_upper: Option<f64>,
}

impl DecrementCertificate {
    pub fn new(decrement: f64, sc_constant: f64) -> Self {
        DecrementCertificate {
            decrement,
            sc_constant,
            suboptimality_upper: suboptimality_certificate(decrement, sc_constant).ok(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub v_star: ReparamPoint,
    pub iterations: usize,
    pub final_decrement: f64,
    pub certificate: DecrementCertificate,
    /// Total step halvings caused by domain exits.
    pub halvings: usize,
    /// Cached quantities at `v_star`.
    pub state: RoundState,
}

impl SolveOutcome {
    pub fn portfolio(&self) -> &Portfolio {
        self.state.portfolio()
    }
}

/// Exact Hessian of `P^1` at a built state: `H + mu (3Q - 2S)`.
pub fn potential_hessian(s: &RoundState, mu: f64) -> DMatrix<f64> {
    if mu == 0.0 {
        s.hess().clone()
    } else {
        s.hess() + s.volumetric_hessian() * mu
    }
}

/// Quasi-Newton model `H + 3 mu Q`.
pub fn potential_model(s: &RoundState, mu: f64) -> DMatrix<f64> {
    if mu == 0.0 {
        s.hess().clone()
    } else {
        s.hess() + s.hessian_model_q() * (3.0 * mu)
    }
}

/// Moves from `v` along `-scale * dir`, halving `scale` until the iterate is
/// interior and the state can be built.
fn guarded_step(
    h: &LossHistory,
    v: &DVector<f64>,
    dir: &DVector<f64>,
    mut scale: f64,
    halvings: &mut usize,
) -> Result<(DVector<f64>, RoundState)> {
    for _ in 0..=MAX_HALVINGS {
        let cand = v - dir * scale;
        let point = ReparamPoint::from_vector(&cand);
        if point.is_interior() {
            if let Ok(s) = RoundState::build(h, &to_simplex(&point)) {
                return Ok((cand, s));
            }
        }
        scale *= 0.5;
        *halvings += 1;
    }
    Err(Error::LeftDomain {
        halvings: MAX_HALVINGS,
    })
}

/// Minimizes `P_t` over the open simplex by damped Newton with the exact
/// Hessian, stopping once the Newton decrement is at most
/// `params.decrement_tol`.
pub fn minimize_exact(
    h: &LossHistory,
    params: &HyperParams,
    warm_start: &ReparamPoint,
) -> Result<SolveOutcome> {
    params.validate()?;
    if warm_start.coords().len() + 1 != h.d() {
        return Err(Error::DimensionMismatch {
            expected: h.d() - 1,
            got: warm_start.coords().len(),
        });
    }
    if !warm_start.is_interior() {
        return Err(Error::BoundaryPoint);
    }
    let m_sc = sc_constant(params);
    let mut v = warm_start.to_vector();
    let mut state = RoundState::build_at(h, warm_start)?;
    let mut halvings = 0;
    for iteration in 0..=params.max_iterations {
        let g = state.potential_gradient(params.mu);
        let hess = potential_hessian(&state, params.mu);
        let factor = Cholesky::new(hess).ok_or(Error::SingularHessian)?;
        let decrement = newton_decrement(&g, &factor);
        if !decrement.is_finite() {
            return Err(Error::SingularHessian);
        }
        if decrement <= params.decrement_tol {
            return Ok(SolveOutcome {
                v_star: ReparamPoint::from_vector(&v),
                iterations: iteration,
                final_decrement: decrement,
                certificate: DecrementCertificate::new(decrement, m_sc),
                halvings,
                state,
            });
        }
        if iteration == params.max_iterations {
            return Err(Error::MaxIterations {
                iterations: iteration,
                decrement,
            });
        }
        let dir = factor.solve(&g);
        let scale = if m_sc * decrement > 0.25 {
            1.0 / (1.0 + m_sc * decrement)
        } else {
            1.0
        };
        let (next, next_state) = guarded_step(h, &v, &dir, scale, &mut halvings)?;
        v = next;
        state = next_state;
    }
    unreachable!("loop returns on its last iteration")
}

/// Minimizes from the uniform portfolio.
pub fn minimize_from_uniform(h: &LossHistory, params: &HyperParams) -> Result<SolveOutcome> {
    minimize_exact(h, params, &to_solid(&Portfolio::uniform(h.d())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiNewtonOutcome {
    pub portfolio: Portfolio,
    /// Iterations actually performed (equals `steps` unless early exit is on).
    pub steps_taken: usize,
    /// Iterations whose undamped step left the domain and were replaced by a
    /// damped, guarded step.
    pub fallbacks: usize,
    /// Model decrement `|g|_{M^-1}` before each step.
    pub decrements: Vec<f64>,
}

/// One round of the quasi-Newton update: `params.steps` undamped steps
/// `v <- v - M^-1 g` on `P_{t-1}` with `M = H + 3 mu Q`, started at
/// `w_prev`.
pub fn quasi_newton_round(
    h: &LossHistory,
    params: &HyperParams,
    w_prev: &Portfolio,
) -> Result<QuasiNewtonOutcome> {
    params.validate()?;
    if w_prev.dim() != h.d() {
        return Err(Error::DimensionMismatch {
            expected: h.d(),
            got: w_prev.dim(),
        });
    }
    if !w_prev.is_interior() {
        return Err(Error::BoundaryPoint);
    }
    let m_sc = sc_constant(params);
    let mut v = to_solid(w_prev).to_vector();
    let mut state = RoundState::build(h, w_prev)?;
    let mut decrements = Vec::with_capacity(params.steps);
    let mut fallbacks = 0;
    let mut steps_taken = 0;
    for _ in 0..params.steps {
        let g = state.potential_gradient(params.mu);
        let factor =
            Cholesky::new(potential_model(&state, params.mu)).ok_or(Error::SingularHessian)?;
        let decrement = newton_decrement(&g, &factor);
        decrements.push(decrement);
        if params.qn_early_exit.is_some_and(|eps| decrement <= eps) {
            break;
        }
        let dir = factor.solve(&g);
        let cand = &v - &dir;
        let point = ReparamPoint::from_vector(&cand);
        let built = if point.is_interior() {
            RoundState::build(h, &to_simplex(&point)).ok()
        } else {
            None
        };
        match built {
            Some(s) => {
                v = cand;
                state = s;
            }
            None => {
                fallbacks += 1;
                let mut halvings = 0;
                let scale = 1.0 / (1.0 + m_sc * decrement);
                let (next, s) = guarded_step(h, &v, &dir, scale, &mut halvings)?;
                v = next;
                state = s;
            }
        }
        steps_taken += 1;
    }
    Ok(QuasiNewtonOutcome {
        portfolio: state.portfolio().clone(),
        steps_taken,
        fallbacks,
        decrements,
    })
}
