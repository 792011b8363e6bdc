//! Online portfolio strategies behind one interface.
//!
//! Protocol per round: call [`StrategyState::next_portfolio`] to get `w_t`,
//! then [`StrategyState::observe`] with the revealed `x_t`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::barrier::{loss, validate_return, HyperParams, LossHistory};
use crate::error::{Error, Result};
use crate::geometry::{to_solid, Portfolio};
use crate::solver::{minimize_exact, quasi_newton_round, QuasiNewtonOutcome, SolveOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    /// Exact minimization of `P_{t-1}` each round.
    Vbftrl,
    /// Fixed number of quasi-Newton steps per round.
    VbftrlQn,
    /// Log-barrier FTRL: `Vbftrl` with `mu = 0`.
    Lbftrl,
    /// Mean of `exp(-L_{t-1}/mu)` by quadrature; `d <= 3`.
    CoverQuad,
    /// Exponentiated gradient.
    Eg,
    /// Online Newton step.
    Ons,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::Vbftrl,
        StrategyKind::VbftrlQn,
        StrategyKind::Lbftrl,
        StrategyKind::CoverQuad,
        StrategyKind::Eg,
        StrategyKind::Ons,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Vbftrl => "vbftrl",
            StrategyKind::VbftrlQn => "vbftrl-qn",
            StrategyKind::Lbftrl => "lbftrl",
            StrategyKind::CoverQuad => "cover",
            StrategyKind::Eg => "eg",
            StrategyKind::Ons => "ons",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy `{s}`")))
    }
}

/// Parameters of the EG and ONS baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub eg_rate: f64,
    /// ONS `beta`.
    pub ons_beta: f64,
    /// ONS `delta`.
    pub ons_delta: f64,
    /// Weight of the uniform portfolio mixed into each ONS iterate.
    pub ons_mix: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            eg_rate: 0.05,
            ons_beta: 1.0,
            ons_delta: 0.125,
            ons_mix: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub params: HyperParams,
    /// Cells per simplex edge for `CoverQuad`; `None` picks 400 (d = 2) or
    /// 80 (d = 3).
    pub quad_resolution: Option<usize>,
    pub baseline: BaselineParams,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind, params: HyperParams) -> Self {
        StrategyConfig {
            kind,
            params,
            quad_resolution: None,
            baseline: BaselineParams::default(),
        }
    }

    /// The exact learner with `lambda = 16, mu = 7`.
    pub fn vbftrl() -> Self {
        StrategyConfig::new(StrategyKind::Vbftrl, HyperParams::exact_preset())
    }

    /// The quasi-Newton learner with its preset for horizon `T`.
    pub fn vbftrl_qn(horizon: usize, d: usize) -> Self {
        StrategyConfig::new(
            StrategyKind::VbftrlQn,
            HyperParams::quasi_newton_preset(horizon, d),
        )
    }

    /// The parameters actually used (`mu` forced to zero for `Lbftrl`).
    pub fn effective_params(&self) -> HyperParams {
        let mut p = self.params.clone();
        if self.kind == StrategyKind::Lbftrl {
            p.mu = 0.0;
        }
        p
    }

    pub fn resolution(&self, d: usize) -> usize {
        self.quad_resolution
            .unwrap_or(if d == 2 { 400 } else { 80 })
    }
}

/// Cell centroids of a uniform grid on the simplex with running
/// log-densities.
#[derive(Debug, Clone)]
struct CoverGrid {
    points: Vec<Vec<f64>>,
    log_density: Vec<f64>,
    inv_mu: f64,
}

impl CoverGrid {
    fn new(d: usize, res: usize, lambda: f64, mu: f64) -> Self {
        let n = res as f64;
        let mut points = Vec::new();
        match d {
            2 => {
                for k in 0..res {
                    let p = (k as f64 + 0.5) / n;
                    points.push(vec![p, 1.0 - p]);
                }
            }
            3 => {
                // Upward triangles (i,j),(i+1,j),(i,j+1) and downward
                // triangles (i+1,j),(i,j+1),(i+1,j+1) in barycentric units.
                for i in 0..res {
                    for j in 0..res - i {
                        let (a, b) = (i as f64, j as f64);
                        points.push(vec![(a + 1.0 / 3.0) / n, (b + 1.0 / 3.0) / n]);
                        if i + j + 1 < res {
                            points.push(vec![(a + 2.0 / 3.0) / n, (b + 2.0 / 3.0) / n]);
                        }
                    }
                }
                for p in points.iter_mut() {
                    let last = 1.0 - p[0] - p[1];
                    p.push(last);
                }
            }
            _ => unreachable!("guarded by the caller"),
        }
        let inv_mu = 1.0 / mu;
        let log_density = points
            .iter()
            .map(|p| inv_mu * lambda * p.iter().map(|w| w.ln()).sum::<f64>())
            .collect();
        CoverGrid {
            points,
            log_density,
            inv_mu,
        }
    }

    fn observe(&mut self, x: &[f64]) {
        for (p, ld) in self.points.iter().zip(self.log_density.iter_mut()) {
            let dot: f64 = p.iter().zip(x).map(|(a, b)| a * b).sum();
            *ld += self.inv_mu * dot.ln();
        }
    }

    fn mean(&self) -> Vec<f64> {
        let top = self
            .log_density
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let d = self.points[0].len();
        let mut acc = vec![0.0; d];
        let mut total = 0.0;
        for (p, ld) in self.points.iter().zip(&self.log_density) {
            let wgt = (ld - top).exp();
            total += wgt;
            for (a, pi) in acc.iter_mut().zip(p) {
                *a += wgt * pi;
            }
        }
        acc.iter().map(|a| a / total).collect()
    }
}

#[derive(Debug, Clone)]
enum Scratch {
    None,
    Cover(CoverGrid),
    Ons { a: DMatrix<f64>, b: DVector<f64> },
}

/// Mutable per-run state of a strategy.
#[derive(Debug, Clone)]
pub struct StrategyState {
    config: StrategyConfig,
    history: LossHistory,
    current: Portfolio,
    scratch: Scratch,
    last_solve: Option<SolveOutcome>,
    last_qn: Option<QuasiNewtonOutcome>,
    /// Whether `current` already answers the next `next_portfolio` call.
    ready: bool,
}

impl StrategyState {
    pub fn new(config: StrategyConfig, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::UnsupportedDimension {
                d,
                reason: "at least two assets are required",
            });
        }
        let p = config.effective_params();
        let scratch = match config.kind {
            StrategyKind::Vbftrl | StrategyKind::VbftrlQn | StrategyKind::Lbftrl => {
                p.validate()?;
                Scratch::None
            }
            StrategyKind::CoverQuad => {
                if d > 3 {
                    return Err(Error::UnsupportedDimension {
                        d,
                        reason: "quadrature reference supports d <= 3",
                    });
                }
                if !(p.mu > 0.0) || !(p.lambda >= 0.0) {
                    return Err(Error::InvalidParameter(
                        "quadrature reference needs mu > 0 and lambda >= 0".into(),
                    ));
                }
                let res = config.resolution(d);
                if res == 0 {
                    return Err(Error::InvalidParameter(
                        "quad resolution must be >= 1".into(),
                    ));
                }
                Scratch::Cover(CoverGrid::new(d, res, p.lambda, p.mu))
            }
            StrategyKind::Eg => {
                if !(config.baseline.eg_rate > 0.0) {
                    return Err(Error::InvalidParameter("eg_rate must be positive".into()));
                }
                Scratch::None
            }
            StrategyKind::Ons => {
                let b = &config.baseline;
                if !(b.ons_beta > 0.0 && b.ons_delta > 0.0 && (0.0..=1.0).contains(&b.ons_mix)) {
                    return Err(Error::InvalidParameter("invalid ONS parameters".into()));
                }
                Scratch::Ons {
                    a: DMatrix::identity(d, d),
                    b: DVector::zeros(d),
                }
            }
        };
        let lambda = if matches!(config.kind, StrategyKind::Eg | StrategyKind::Ons) {
            0.0
        } else {
            p.lambda
        };
        Ok(StrategyState {
            history: LossHistory::new(d, lambda)?,
            current: Portfolio::uniform(d),
            scratch,
            last_solve: None,
            last_qn: None,
            ready: true,
            config,
        })
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.config
    }

    pub fn history(&self) -> &LossHistory {
        &self.history
    }

    pub fn current(&self) -> &Portfolio {
        &self.current
    }

    /// Solver output behind the most recent exact-update portfolio.
    pub fn last_solve(&self) -> Option<&SolveOutcome> {
        self.last_solve.as_ref()
    }

    pub fn last_quasi_newton(&self) -> Option<&QuasiNewtonOutcome> {
        self.last_qn.as_ref()
    }

    /// The portfolio for the next round, given the rounds observed so far.
    pub fn next_portfolio(&mut self) -> Result<Portfolio> {
        if self.ready {
            return Ok(self.current.clone());
        }
        let params = self.config.effective_params();
        let next = match (&self.config.kind, &self.scratch) {
            (StrategyKind::Vbftrl | StrategyKind::Lbftrl, _) => {
                let out = minimize_exact(&self.history, &params, &to_solid(&self.current))?;
                let w = out.portfolio().clone();
                self.last_solve = Some(out);
                w
            }
            (StrategyKind::VbftrlQn, _) => {
                let out = quasi_newton_round(&self.history, &params, &self.current)?;
                let w = out.portfolio.clone();
                self.last_qn = Some(out);
                w
            }
            (StrategyKind::CoverQuad, Scratch::Cover(grid)) => Portfolio::normalized(grid.mean())?,
            _ => self.current.clone(),
        };
        if !next.is_interior() {
            return Err(Error::BoundaryPoint);
        }
        self.current = next;
        self.ready = true;
        Ok(self.current.clone())
    }

    /// Records `x_t`, the return vector of the round just played with
    /// [`Self::current`].
    pub fn observe(&mut self, x: &[f64]) -> Result<()> {
        validate_return(x, self.history.d())?;
        let played = self.current.clone();
        match &mut self.scratch {
            Scratch::Cover(grid) => grid.observe(x),
            Scratch::Ons { a, b } => {
                let base = &self.config.baseline;
                let wealth = played.dot(x);
                let grad = DVector::from_iterator(x.len(), x.iter().map(|xi| xi / wealth));
                *a += &grad * grad.transpose();
                b.axpy(1.0 + 1.0 / base.ons_beta, &grad, 1.0);
                let factor = Cholesky::new(a.clone()).ok_or(Error::SingularHessian)?;
                let target = factor.solve(b) * base.ons_delta;
                let projected = project_simplex_in_metric(a, &target);
                let d = x.len() as f64;
                let mixed = projected
                    .iter()
                    .map(|p| (1.0 - base.ons_mix) * p + base.ons_mix / d)
                    .collect();
                self.current = Portfolio::normalized(mixed)?;
            }
            Scratch::None if self.config.kind == StrategyKind::Eg => {
                let eta = self.config.baseline.eg_rate;
                let wealth = played.dot(x);
                let raw = played
                    .weights()
                    .iter()
                    .zip(x)
                    .map(|(w, xi)| w * (eta * xi / wealth).exp())
                    .collect();
                self.current = Portfolio::normalized(raw)?;
            }
            Scratch::None => {}
        }
        loss(x, &played)?;
        self.history.push(x.to_vec())?;
        self.ready = matches!(self.config.kind, StrategyKind::Eg | StrategyKind::Ons);
        Ok(())
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, uk) in u.iter().enumerate() {
        cum += uk;
        let cand = (cum - 1.0) / (k as f64 + 1.0);
        if uk - cand > 0.0 {
            theta = cand;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// `argmin_{p in simplex} (p - y)^T A (p - y)` by accelerated projected
/// gradient.
pub fn project_simplex_in_metric(a: &DMatrix<f64>, y: &DVector<f64>) -> Vec<f64> {
    let step = 1.0 / a.symmetric_eigenvalues().max();
    let mut p = DVector::from_vec(project_simplex(y.as_slice()));
    let mut z = p.clone();
    let mut theta: f64 = 1.0;
    for _ in 0..2000 {
        let grad = a * (&z - y);
        let next = DVector::from_vec(project_simplex((&z - grad * step).as_slice()));
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        z = &next + (&next - &p) * ((theta - 1.0) / theta_next);
        let moved = (&next - &p).amax();
        p = next;
        theta = theta_next;
        if moved < 1e-15 {
            break;
        }
    }
    p.iter().copied().collect()
}
