//! Game loop, best-CRP oracle, regret bounds, the per-round auditor and
//! report output.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::barrier::{gain_term, loss, potential_difference, HyperParams, LossHistory, RoundState};
use crate::error::{Error, Result};
use crate::geometry::Portfolio;
use crate::markets::{Adversary, MarketSequence};
use crate::solver::minimize_from_uniform;
use crate::strategies::{StrategyConfig, StrategyKind, StrategyState};

/// Absolute tolerance of the per-round audit inequalities.
pub const AUDIT_TOL: f64 = 1e-8;

/// Named parameter presets with closed-form regret bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// `lambda = 16, mu = 7` for the exact update.
    Thm2,
    /// `lambda = 560, mu = 2` and the matching step count for the
    /// quasi-Newton update.
    Thm3,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thm2" => Ok(Preset::Thm2),
            "thm3" => Ok(Preset::Thm3),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

impl Preset {
    pub fn params(self, horizon: usize, d: usize) -> HyperParams {
        match self {
            Preset::Thm2 => HyperParams::exact_preset(),
            Preset::Thm3 => HyperParams::quasi_newton_preset(horizon, d),
        }
    }
}

/// Closed-form bound of a preset: `30 (d-1) log(T + 16d)` or
/// `564 d log(T + 560 d)`.
pub fn theory_bound(d: usize, horizon: usize, preset: Preset) -> f64 {
    let (d, t) = (d as f64, horizon as f64);
    match preset {
        Preset::Thm2 => 30.0 * (d - 1.0) * (t + 16.0 * d).ln(),
        Preset::Thm3 => 564.0 * d * (t + 560.0 * d).ln(),
    }
}

/// [`theory_bound`] with the preset given by name.
pub fn theory_bound_named(d: usize, horizon: usize, preset: &str) -> Result<f64> {
    Ok(theory_bound(d, horizon, preset.parse()?))
}

/// `(lambda + 2mu)(d-1) log(T + lambda d)`.
pub fn exact_update_bound(lambda: f64, mu: f64, d: usize, horizon: usize) -> f64 {
    (lambda + 2.0 * mu) * (d as f64 - 1.0) * (horizon as f64 + lambda * d as f64).ln()
}

/// `(lambda + 2mu)[(d-1) log(T + lambda d) + 1]`.
pub fn quasi_newton_bound(lambda: f64, mu: f64, d: usize, horizon: usize) -> f64 {
    (lambda + 2.0 * mu) * ((d as f64 - 1.0) * (horizon as f64 + lambda * d as f64).ln() + 1.0)
}

/// Regret bound of the `(lambda, mu)` exponential-weights portfolio
/// (`mu >= 1`). The `lambda` term vanishes continuously at `lambda = 0`.
pub fn generalized_cover_bound(lambda: f64, mu: f64, d: usize, horizon: usize) -> f64 {
    let (df, t) = (d as f64, horizon as f64);
    let barrier = if lambda > 0.0 {
        lambda * (df - 1.0) * (4.0 * std::f64::consts::E * (t + lambda * df) / (lambda * df)).ln()
            - lambda * df.ln()
    } else {
        0.0
    };
    mu * (df - 1.0) * (t + 1.0).ln() + barrier + mu
}

/// The bound that applies to a configuration, if any.
pub fn config_bound(config: &StrategyConfig, d: usize, horizon: usize) -> Option<f64> {
    let p = config.effective_params();
    match config.kind {
        StrategyKind::Vbftrl => {
            if p.lambda == 16.0 && p.mu == 7.0 {
                Some(theory_bound(d, horizon, Preset::Thm2))
            } else if p.satisfies_exact_condition() {
                Some(exact_update_bound(p.lambda, p.mu, d, horizon))
            } else {
                None
            }
        }
        StrategyKind::VbftrlQn => {
            let preset = HyperParams::quasi_newton_preset(horizon, d);
            if p.lambda == preset.lambda && p.mu == preset.mu && p.steps >= preset.steps {
                Some(theory_bound(d, horizon, Preset::Thm3))
            } else if p.satisfies_quasi_newton_condition(horizon, d) {
                Some(quasi_newton_bound(p.lambda, p.mu, d, horizon))
            } else {
                None
            }
        }
        StrategyKind::CoverQuad if p.mu >= 1.0 => {
            Some(generalized_cover_bound(p.lambda, p.mu, d, horizon))
        }
        _ => None,
    }
}

/// Result of the barrier-regularized best-CRP oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestCrp {
    pub portfolio: Portfolio,
    /// Pure cumulative loss of `portfolio`.
    pub loss: f64,
    /// The true minimum lies in `[loss - gap_bound, loss]`.
    pub gap_bound: f64,
    /// Regularization weight used, `min(1, d/T)`.
    pub lambda: f64,
}

/// Minimizes `sum_t loss_t(w) + lambda' R(w)` with `lambda' = min(1, d/T)`.
///
/// For any `w`, the smoothed point `(1-a) w + a/d` loses at most
/// `a T / (1-a)` more, and its barrier is at most
/// `R_a = -log(1 - a + a/d) - (d-1) log(a/d)`. Comparing the regularized
/// objective at that point with the minimizer `w_r` gives
/// `gap_bound = a T/(1-a) + lambda' (R_a - R(w_r))` with
/// `a = lambda'(d-1) / (T + lambda'(d-1))`.
pub fn best_crp(market: &MarketSequence) -> Result<BestCrp> {
    best_crp_of(market.d(), market.rounds())
}

pub fn best_crp_of(d: usize, rounds: &[Vec<f64>]) -> Result<BestCrp> {
    if rounds.is_empty() {
        return Err(Error::InvalidParameter(
            "best CRP needs at least one round".into(),
        ));
    }
    let t = rounds.len() as f64;
    let df = d as f64;
    let lambda = (df / t).min(1.0);
    let h = LossHistory::with_returns(d, lambda, rounds)?;
    let mut params = HyperParams::new(lambda, 0.0);
    params.max_iterations = 2000;
    let out = minimize_from_uniform(&h, &params)?;
    let w = out.portfolio().clone();
    let pure: f64 = rounds.iter().map(|x| loss(x, &w)).sum::<Result<f64>>()?;
    let alpha = lambda * (df - 1.0) / (t + lambda * (df - 1.0));
    let r_max = -(1.0 - alpha + alpha / df).ln() - (df - 1.0) * (alpha / df).ln();
    let r_w: f64 = -w.weights().iter().map(|x| x.ln()).sum::<f64>();
    let gap_bound = alpha * t / (1.0 - alpha) + lambda * (r_max - r_w);
    Ok(BestCrp {
        portfolio: w,
        loss: pure,
        gap_bound: gap_bound.max(0.0),
        lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditFlag {
    /// `Miss + Gain > tol`.
    MissGain,
    /// `Gain > -(mu/2) pi_hat + tol`.
    GainLeverage,
    /// Decrement bound violated.
    Decrement,
    /// `pi_hat > 1/(1+lambda)`.
    Leverage,
    /// Minimum entry below the floor.
    EntryFloor,
    /// `Miss < 0` beyond solver accuracy.
    NegativeMiss,
    /// `Gain > 0`.
    PositiveGain,
    /// The quasi-Newton update fell back to a damped step.
    QuasiNewtonFallback,
}

impl AuditFlag {
    pub fn name(self) -> &'static str {
        match self {
            AuditFlag::MissGain => "miss-gain",
            AuditFlag::GainLeverage => "gain-leverage",
            AuditFlag::Decrement => "decrement",
            AuditFlag::Leverage => "leverage",
            AuditFlag::EntryFloor => "entry-floor",
            AuditFlag::NegativeMiss => "negative-miss",
            AuditFlag::PositiveGain => "positive-gain",
            AuditFlag::QuasiNewtonFallback => "qn-fallback",
        }
    }
}

impl fmt::Display for AuditFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub t: usize,
    /// `P_t(w_t) - P_t(w_{t+1})`.
    pub miss: f64,
    /// `mu (V_{t-1}(w_t) - V_t(w_t))`.
    pub gain: f64,
    /// Leverage of round `t` under `H_t(w_t)`.
    pub pi_hat: f64,
    /// `P_t(w_{t+1}) - P_0(w_1) - sum_{tau <= t} loss_tau(best CRP)`.
    pub bias_running: f64,
    /// Squared decrement of `P_t` at `w_t` in the `H_t(w_t)` metric.
    pub decrement_bound_lhs: f64,
    pub decrement_bound_rhs: f64,
    /// Largest leverage among observed rounds under `H_t(w_t)`.
    pub leverage_max: f64,
    pub min_entry: f64,
    pub entry_floor: f64,
    pub flags: Vec<AuditFlag>,
}

/// Checks one round given the solver states of the exact update.
///
/// * `prev`: history `1..t-1` at `w_t`,
/// * `cur`: history `1..t` at `w_t`,
/// * `next`: history `1..t` at `w_{t+1}`.
pub fn audit_round(
    params: &HyperParams,
    prev: &RoundState,
    cur: &RoundState,
    next: &RoundState,
    x_t: &[f64],
) -> Result<AuditRecord> {
    let (lambda, mu) = (params.lambda, params.mu);
    let t = cur.rounds();
    let miss = potential_difference(cur, next, mu);
    let g = gain_term(prev, x_t, mu)?;
    let decrement_sq = cur.inverse_metric_sq(&cur.potential_gradient(mu));
    let decrement_rhs =
        (1.0 + lambda) * (lambda + 2.0 * mu).powi(2) / lambda.powi(3) * g.leverage + AUDIT_TOL;
    let leverage_max = cur.leverage()[..t].iter().copied().fold(0.0, f64::max);
    let min_entry = prev.portfolio().min_entry();
    let d = prev.dim() + 1;
    let entry_floor = lambda / ((t - 1) as f64 + lambda * d as f64 + mu * (d - 1) as f64);

    let mut flags = Vec::new();
    if miss + g.gain > AUDIT_TOL {
        flags.push(AuditFlag::MissGain);
    }
    if g.gain > -0.5 * mu * g.leverage + AUDIT_TOL {
        flags.push(AuditFlag::GainLeverage);
    }
    if decrement_sq > decrement_rhs {
        flags.push(AuditFlag::Decrement);
    }
    if g.leverage > 1.0 / (1.0 + lambda) {
        flags.push(AuditFlag::Leverage);
    }
    if min_entry < entry_floor - 1e-10 {
        flags.push(AuditFlag::EntryFloor);
    }
    if miss < -1e-9 {
        flags.push(AuditFlag::NegativeMiss);
    }
    if g.gain > 0.0 {
        flags.push(AuditFlag::PositiveGain);
    }
    Ok(AuditRecord {
        t,
        miss,
        gain: g.gain,
        pi_hat: g.leverage,
        bias_running: f64::NAN,
        decrement_bound_lhs: decrement_sq,
        decrement_bound_rhs: decrement_rhs,
        leverage_max,
        min_entry,
        entry_floor,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub loss: f64,
    pub cumulative_loss: f64,
    pub wealth: f64,
    /// Cumulative loss minus the final best CRP's loss over rounds `1..t`.
    pub regret_running: f64,
    /// Applicable bound evaluated at horizon `t`.
    pub theory_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub strategy: StrategyKind,
    pub params: HyperParams,
    pub d: usize,
    pub horizon: usize,
    pub per_round: Vec<RoundRecord>,
    /// `w_1, ..., w_T`.
    pub portfolios: Vec<Portfolio>,
    /// `x_1, ..., x_T` as played (adaptive markets included).
    pub returns: Vec<Vec<f64>>,
    pub best_crp: Portfolio,
    pub best_crp_loss: f64,
    pub best_crp_gap_bound: f64,
    pub regret: f64,
    pub theory_bound: Option<f64>,
    pub audit: Vec<AuditRecord>,
    /// Whether `(lambda, mu)` meet the exact update's parameter condition.
    pub parameter_condition: bool,
    pub quad_resolution: Option<usize>,
    pub qn_fallbacks: usize,
    pub min_entry: f64,
}

impl RegretReport {
    pub fn cumulative_loss(&self) -> f64 {
        self.per_round.last().map_or(0.0, |r| r.cumulative_loss)
    }

    pub fn wealth(&self) -> f64 {
        (-self.cumulative_loss()).exp()
    }

    pub fn audit_flag_count(&self) -> usize {
        self.audit.iter().map(|a| a.flags.len()).sum()
    }

    /// `regret <= bound + gap_bound + tol`; `None` without a bound.
    pub fn within_bound(&self, tol: f64) -> Option<bool> {
        self.theory_bound
            .map(|b| self.regret <= b + self.best_crp_gap_bound + tol)
    }
}

/// Where the returns of a game come from.
pub enum Market<'a> {
    Oblivious(&'a MarketSequence),
    Adaptive {
        adversary: &'a mut dyn Adversary,
        horizon: usize,
    },
}

fn is_exact(kind: StrategyKind) -> bool {
    matches!(kind, StrategyKind::Vbftrl | StrategyKind::Lbftrl)
}

/// Plays a full game. With `audit`, exact-update runs also compute
/// `w_{T+1}` and one extra [`RoundState`] per round.
pub fn run_game(config: &StrategyConfig, market: Market<'_>, audit: bool) -> Result<RegretReport> {
    let (d, horizon, rounds, mut adversary) = match market {
        Market::Oblivious(m) => (m.d(), m.len(), Some(m.rounds()), None),
        Market::Adaptive { adversary, horizon } => (adversary.d(), horizon, None, Some(adversary)),
    };
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    let params = config.effective_params();
    let auditing = audit && is_exact(config.kind);
    let mut state = StrategyState::new(config.clone(), d)?;

    let mut played = Vec::with_capacity(horizon);
    let mut losses = Vec::with_capacity(horizon);
    let mut portfolios = Vec::with_capacity(horizon);
    let mut audit_records = Vec::new();
    let mut potentials_next = Vec::new();
    let mut qn_fallbacks = 0;
    let mut min_entry = f64::INFINITY;
    let mut p0_at_w1 = 0.0;

    for t in 0..horizon {
        let w = state.next_portfolio()?;
        if t > 0 {
            if let Some(qn) = state.last_quasi_newton() {
                qn_fallbacks += qn.fallbacks;
            }
        }
        min_entry = min_entry.min(w.min_entry());
        let prev = if auditing {
            let s = match state.last_solve() {
                Some(out) if t > 0 => out.state.clone(),
                _ => RoundState::build(state.history(), &w)?,
            };
            if t == 0 {
                p0_at_w1 = s.potential_value(params.mu);
            }
            Some(s)
        } else {
            None
        };
        let x = match (rounds, adversary.as_mut()) {
            (Some(r), _) => r[t].clone(),
            (None, Some(adv)) => adv.next_return(&w)?,
            (None, None) => unreachable!("one market source is always present"),
        };
        losses.push(loss(&x, &w)?);
        state.observe(&x)?;
        if let Some(prev) = prev {
            let cur = RoundState::build(state.history(), &w)?;
            // Cached by the strategy, so the next round reuses this solve.
            let w_next = state.next_portfolio()?;
            let next = match state.last_solve() {
                Some(out) => out.state.clone(),
                None => RoundState::build(state.history(), &w_next)?,
            };
            let mut rec = audit_round(&params, &prev, &cur, &next, &x)?;
            if let Some(q) = state.last_quasi_newton() {
                if q.fallbacks > 0 {
                    rec.flags.push(AuditFlag::QuasiNewtonFallback);
                }
            }
            potentials_next.push(next.potential_value(params.mu));
            audit_records.push(rec);
        }
        portfolios.push(w);
        played.push(x);
    }

    let crp = best_crp_of(d, &played)?;
    let crp_losses: Vec<f64> = played
        .iter()
        .map(|x| loss(x, &crp.portfolio))
        .collect::<Result<_>>()?;
    let mut per_round = Vec::with_capacity(horizon);
    let (mut cum, mut cum_crp) = (0.0, 0.0);
    for t in 0..horizon {
        cum += losses[t];
        cum_crp += crp_losses[t];
        per_round.push(RoundRecord {
            t: t + 1,
            loss: losses[t],
            cumulative_loss: cum,
            wealth: (-cum).exp(),
            regret_running: cum - cum_crp,
            theory_bound: config_bound(config, d, t + 1),
        });
        if let Some(rec) = audit_records.get_mut(t) {
            rec.bias_running = potentials_next[t] - p0_at_w1 - cum_crp;
        }
    }
    Ok(RegretReport {
        strategy: config.kind,
        params: params.clone(),
        d,
        horizon,
        per_round,
        portfolios,
        returns: played,
        best_crp: crp.portfolio,
        best_crp_loss: crp.loss,
        best_crp_gap_bound: crp.gap_bound,
        regret: cum - crp.loss,
        theory_bound: config_bound(config, d, horizon),
        audit: audit_records,
        parameter_condition: params.satisfies_exact_condition(),
        quad_resolution: (config.kind == StrategyKind::CoverQuad).then(|| config.resolution(d)),
        qn_fallbacks,
        min_entry,
    })
}

/// Runs independent (strategy, market) cells on scoped threads.
pub fn run_tournament(
    cells: &[(StrategyConfig, MarketSequence)],
    audit: bool,
) -> Vec<Result<RegretReport>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = cells
            .iter()
            .map(|(cfg, market)| {
                scope.spawn(move || run_game(cfg, Market::Oblivious(market), audit))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("tournament cell panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidParameter(format!("unknown format `{other}`"))),
        }
    }
}

pub const CSV_COLUMNS: [&str; 9] = [
    "t",
    "loss",
    "cum_loss",
    "wealth",
    "regret_running",
    "theory_bound",
    "miss",
    "gain",
    "flags",
];

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row per round; audit columns are blank for unaudited runs.
pub fn write_csv<W: Write>(report: &RegretReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::IoError(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for r in &report.per_round {
        let audit = report.audit.get(r.t - 1);
        w.write_record([
            r.t.to_string(),
            sci(r.loss),
            sci(r.cumulative_loss),
            sci(r.wealth),
            sci(r.regret_running),
            r.theory_bound.map(sci).unwrap_or_default(),
            audit.map(|a| sci(a.miss)).unwrap_or_default(),
            audit.map(|a| sci(a.gain)).unwrap_or_default(),
            audit
                .map(|a| {
                    a.flags
                        .iter()
                        .map(|f| f.name())
                        .collect::<Vec<_>>()
                        .join("|")
                })
                .unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_json(report: &RegretReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::IoError(e.to_string()))
}

pub fn from_json(s: &str) -> Result<RegretReport> {
    serde_json::from_str(s).map_err(|e| Error::IoError(e.to_string()))
}

pub fn emit_report(report: &RegretReport, out_path: &Path, format: ReportFormat) -> Result<()> {
    let file = BufWriter::new(File::create(out_path)?);
    match format {
        ReportFormat::Csv => write_csv(report, file),
        ReportFormat::Json => {
            let mut file = file;
            file.write_all(to_json(report)?.as_bytes())?;
            file.flush()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markets::{gen_iid_lognormal, gen_two_asset_switch, Provenance};

    #[test]
    fn bound_examples() {
        assert!((theory_bound(2, 100, Preset::Thm2) - 30.0 * 132f64.ln()).abs() < 1e-12);
        assert!((theory_bound(3, 1000, Preset::Thm3) - 564.0 * 3.0 * 2680f64.ln()).abs() < 1e-9);
        for d in 2..6 {
            assert!(
                (exact_update_bound(16.0, 7.0, d, 500) - theory_bound(d, 500, Preset::Thm2)).abs()
                    < 1e-9
            );
        }
        assert_eq!(
            theory_bound_named(2, 10, "thm4"),
            Err(Error::UnknownPreset("thm4".into()))
        );
        let c = generalized_cover_bound(0.0, 1.0, 2, 200);
        assert!((c - (201f64.ln() + 1.0)).abs() < 1e-12);
        assert!((generalized_cover_bound(1e-12, 1.0, 2, 200) - c).abs() < 1e-9);
    }

    #[test]
    fn all_ones_market_has_zero_regret() {
        let m =
            MarketSequence::new(3, vec![vec![1.0; 3]; 20], Provenance::Synthetic, None).unwrap();
        for kind in StrategyKind::ALL {
            let mut cfg = StrategyConfig::new(kind, HyperParams::exact_preset());
            if kind == StrategyKind::VbftrlQn {
                cfg = StrategyConfig::vbftrl_qn(20, 3);
            }
            if kind == StrategyKind::CoverQuad {
                cfg.quad_resolution = Some(20);
            }
            let r = run_game(&cfg, Market::Oblivious(&m), true).unwrap();
            assert!(r.regret.abs() < 1e-12, "{kind}");
            assert!((r.wealth() - 1.0).abs() < 1e-12);
            for a in &r.audit {
                assert!(a.miss.abs() < 1e-12 && a.gain == 0.0);
            }
        }
    }

    #[test]
    fn switch_market_best_crp_is_half() {
        let crp = best_crp(&gen_two_asset_switch(200).unwrap()).unwrap();
        assert!((crp.portfolio.weights()[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn single_asset_market_best_crp_near_vertex() {
        let m =
            MarketSequence::new(2, vec![vec![1.0, 0.0]; 400], Provenance::Synthetic, None).unwrap();
        let crp = best_crp(&m).unwrap();
        let (t, d) = (400.0, 2.0);
        assert!(crp.portfolio.weights()[0] >= 1.0 - 2.0 * crp.lambda * d / t);
        assert!(crp.loss >= 0.0 && crp.loss - crp.gap_bound <= 0.0);
    }

    #[test]
    fn decomposition_identity_holds_each_round() {
        let m = gen_iid_lognormal(3, 40, 0.3, 5).unwrap();
        let r = run_game(&StrategyConfig::vbftrl(), Market::Oblivious(&m), true).unwrap();
        let mut acc = 0.0;
        for (a, pr) in r.audit.iter().zip(&r.per_round) {
            acc += a.miss + a.gain;
            assert!((pr.regret_running - (a.bias_running + acc)).abs() < 1e-8);
        }
        assert_eq!(r.audit_flag_count(), 0);
    }

    #[test]
    fn reports_round_trip() {
        let m = gen_iid_lognormal(2, 15, 0.2, 3).unwrap();
        let r = run_game(&StrategyConfig::vbftrl(), Market::Oblivious(&m), true).unwrap();
        assert_eq!(from_json(&to_json(&r).unwrap()).unwrap(), r);
        let mut buf = Vec::new();
        write_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 16);
        assert!(
            text.starts_with("t,loss,cum_loss,wealth,regret_running,theory_bound,miss,gain,flags")
        );

        let plain = run_game(
            &StrategyConfig::new(StrategyKind::Eg, HyperParams::exact_preset()),
            Market::Oblivious(&m),
            true,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&plain, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",,,,"));
    }
}
