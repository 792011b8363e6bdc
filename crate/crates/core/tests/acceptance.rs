//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! straight to stderr (visible without `--nocapture`).

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vbftrl::barrier::{HyperParams, LossHistory, RoundState};
use vbftrl::geometry::{to_simplex, to_solid, Portfolio, ReparamPoint};
use vbftrl::harness::{
    best_crp, generalized_cover_bound, run_game, theory_bound, Market, Preset, RegretReport,
};
use vbftrl::markets::{
    gen_iid_lognormal, gen_two_asset_switch, MarketSequence, Provenance, WorstCoordinate,
};
use vbftrl::solver::{minimize_exact, minimize_from_uniform, quasi_newton_round};
use vbftrl::strategies::{StrategyConfig, StrategyKind, StrategyState};

const DIMS: [usize; 3] = [2, 3, 5];
const HORIZONS: [usize; 3] = [50, 200, 1000];
const SEEDS: [u64; 3] = [11, 22, 33];
const IID_VOL: f64 = 0.1;

fn report(id: &str, pass: bool, detail: String) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "[acceptance] criterion {id}: {status} ({detail})"
    );
}

#[derive(Clone, Copy, Debug)]
enum MarketKind {
    Adversary,
    Iid(u64),
    Switch,
}

fn cells() -> Vec<(usize, usize, MarketKind)> {
    let mut out = Vec::new();
    for &d in &DIMS {
        for &t in &HORIZONS {
            out.push((d, t, MarketKind::Adversary));
            for s in SEEDS {
                out.push((d, t, MarketKind::Iid(s)));
            }
            if d == 2 {
                out.push((d, t, MarketKind::Switch));
            }
        }
    }
    out
}

fn play(cfg: &StrategyConfig, d: usize, t: usize, kind: MarketKind, audit: bool) -> RegretReport {
    match kind {
        MarketKind::Adversary => {
            let mut adv = WorstCoordinate { d };
            run_game(
                cfg,
                Market::Adaptive {
                    adversary: &mut adv,
                    horizon: t,
                },
                audit,
            )
            .unwrap()
        }
        MarketKind::Iid(seed) => {
            let m = gen_iid_lognormal(d, t, IID_VOL, seed).unwrap();
            run_game(cfg, Market::Oblivious(&m), audit).unwrap()
        }
        MarketKind::Switch => {
            let m = gen_two_asset_switch(t).unwrap();
            run_game(cfg, Market::Oblivious(&m), audit).unwrap()
        }
    }
}

type Grid = Vec<((usize, usize, MarketKind), RegretReport)>;

fn run_grid(make: impl Fn(usize, usize) -> StrategyConfig + Sync, audit: bool) -> Grid {
    let cells = cells();
    std::thread::scope(|s| {
        let handles: Vec<_> = cells
            .iter()
            .map(|&(d, t, k)| {
                let make = &make;
                s.spawn(move || ((d, t, k), play(&make(d, t), d, t, k, audit)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

fn exact_grid() -> &'static Grid {
    static GRID: OnceLock<Grid> = OnceLock::new();
    GRID.get_or_init(|| run_grid(|_, _| StrategyConfig::vbftrl(), true))
}

#[test]
fn criterion_1_exact_regret_bound() {
    let started = Instant::now();
    let grid = exact_grid();
    let mut pass = true;
    let mut conservative = true;
    let mut worst_ratio: f64 = 0.0;
    for ((d, t, k), r) in grid {
        let bound = theory_bound(*d, *t, Preset::Thm2);
        assert_eq!(r.theory_bound, Some(bound));
        let ok = r.regret <= bound + r.best_crp_gap_bound + 1e-6;
        conservative &= r.regret + r.best_crp_gap_bound <= bound + 1e-6;
        worst_ratio = worst_ratio.max(r.regret / bound);
        if !ok {
            eprintln!(
                "violation d={d} T={t} {k:?}: regret {} bound {bound}",
                r.regret
            );
        }
        pass &= ok;
    }
    report(
        "1 (exact update, lambda=16 mu=7)",
        pass,
        format!(
            "{} runs, max regret/bound {worst_ratio:.3}, regret+gap within bound: {conservative}, {:.1}s",
            grid.len(),
            started.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_quasi_newton_regret_bound() {
    let started = Instant::now();
    let grid = run_grid(|d, t| StrategyConfig::vbftrl_qn(t, d), false);
    let mut pass = true;
    let mut conservative = true;
    let mut worst_ratio: f64 = 0.0;
    let mut fallbacks = 0;
    for ((d, t, k), r) in &grid {
        let bound = theory_bound(*d, *t, Preset::Thm3);
        assert_eq!(r.theory_bound, Some(bound));
        let ok = r.regret <= bound + r.best_crp_gap_bound + 1e-6;
        conservative &= r.regret + r.best_crp_gap_bound <= bound + 1e-6;
        worst_ratio = worst_ratio.max(r.regret / bound);
        fallbacks += r.qn_fallbacks;
        if !ok {
            eprintln!(
                "violation d={d} T={t} {k:?}: regret {} bound {bound}",
                r.regret
            );
        }
        pass &= ok;
    }
    report(
        "2 (quasi-Newton, lambda=560 mu=2)",
        pass,
        format!(
            "{} runs, max regret/bound {worst_ratio:.4}, regret+gap within bound: {conservative}, fallbacks {fallbacks}, {:.1}s",
            grid.len(),
            started.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_trajectory_stability() {
    let (d, horizon) = (3, 30);
    let params = HyperParams::quasi_newton_preset(horizon, d);
    let mu = params.mu;
    let limit = ((horizon + d + 1) as f64)
        .powi(-2)
        .min(1e-4 / (1.0 + 3.0 * mu).sqrt());
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for seed in 0..5u64 {
        let market = gen_iid_lognormal(d, horizon, 0.5, 100 + seed).unwrap();
        let mut qn = StrategyState::new(
            StrategyConfig::new(StrategyKind::VbftrlQn, params.clone()),
            d,
        )
        .unwrap();
        let mut exact_params = params.clone();
        exact_params.decrement_tol = 1e-10;
        let mut h = LossHistory::new(d, params.lambda).unwrap();
        let mut w_exact = Portfolio::uniform(d);
        for x in market.rounds() {
            let w_qn = qn.next_portfolio().unwrap();
            w_exact = minimize_exact(&h, &exact_params, &to_solid(&w_exact))
                .unwrap()
                .portfolio()
                .clone();
            h.push(x.clone()).unwrap();
            // Norm induced by the Hessian of L_t, rounds 1..t, at w_t.
            let s = RoundState::build(&h, &w_exact).unwrap();
            let diff = to_solid(&w_qn).to_vector() - to_solid(&w_exact).to_vector();
            let dist = s.metric_sq(&diff).sqrt();
            worst = worst.max(dist);
            pass &= dist <= limit;
            qn.observe(x).unwrap();
        }
    }
    report(
        "3 (quasi-Newton trajectory stability)",
        pass,
        format!("max distance {worst:.3e} vs limit {limit:.3e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_4_audit_invariants() {
    let mut reports: Vec<RegretReport> = exact_grid().iter().map(|(_, r)| r.clone()).collect();
    for seed in 0..3u64 {
        let m = gen_iid_lognormal(3, 100, 0.5, 500 + seed).unwrap();
        reports.push(run_game(&StrategyConfig::vbftrl(), Market::Oblivious(&m), true).unwrap());
    }
    let mut rounds = 0;
    let mut violations = 0;
    let mut worst_sum = f64::NEG_INFINITY;
    for r in &reports {
        assert!(r.parameter_condition);
        assert_eq!(r.audit.len(), r.horizon);
        let (lambda, mu) = (r.params.lambda, r.params.mu);
        for a in &r.audit {
            rounds += 1;
            worst_sum = worst_sum.max(a.miss + a.gain);
            let ok = a.miss + a.gain <= 1e-8
                && a.gain <= -0.5 * mu * a.pi_hat + 1e-8
                && a.pi_hat <= 1.0 / (1.0 + lambda);
            if !ok {
                violations += 1;
            }
        }
    }
    let pass = violations == 0;
    report(
        "4 (per-round proof invariants)",
        pass,
        format!("{rounds} rounds, {violations} violations, max Miss+Gain {worst_sum:.3e}"),
    );
    assert!(pass);
}

fn random_instance(
    rng: &mut ChaCha8Rng,
    d: usize,
    t: usize,
    lambda: f64,
) -> (LossHistory, Portfolio) {
    let rows: Vec<Vec<f64>> = (0..t)
        .map(|_| {
            (0..d)
                .map(|_| {
                    if rng.random_bool(0.15) {
                        0.0
                    } else {
                        rng.random_range(-1.5..1.5f64).exp()
                    }
                })
                .collect::<Vec<f64>>()
        })
        .map(|mut x: Vec<f64>| {
            if x.iter().all(|&v| v == 0.0) {
                x[0] = 1.0;
            }
            x
        })
        .collect();
    let h = LossHistory::with_returns(d, lambda, &rows).unwrap();
    let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
    (h, Portfolio::normalized(raw).unwrap())
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

#[test]
fn criterion_5_leverage_calculus() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_proj: f64 = 0.0;
    let mut worst_sandwich: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.random_range(2..=6);
        let t = rng.random_range(0..=20);
        let lambda = [1.0, 2.0, 16.0][rng.random_range(0..3)];
        let (h, w) = random_instance(&mut rng, d, t, lambda);
        let s = RoundState::build(&h, &w).unwrap();
        for k in 0..s.term_count() {
            let row = s.gram_row(s.term_at(k)).unwrap();
            let pi = s.leverage()[k];
            let err = (row.norm_squared() - pi).abs() / pi.max(1e-300);
            if pi > 0.0 {
                worst_proj = worst_proj.max(err);
            }
        }
        let hv = s.exact_volumetric_hessian().unwrap();
        let q = s.hessian_model_q();
        let scale = q.norm();
        let lower = min_eig(&(&hv - &q)) / scale;
        let upper = min_eig(&(&q * 3.0 - &hv)) / scale;
        worst_sandwich = worst_sandwich.max(-lower).max(-upper);
    }
    let pass = worst_proj <= 1e-8 && worst_sandwich <= 1e-10;
    report(
        "5 (projection identity and Hessian sandwich)",
        pass,
        format!("max projection rel. error {worst_proj:.2e}, max sandwich violation {worst_sandwich:.2e}"),
    );
    assert!(pass);
}

fn central_diff(v: &DVector<f64>, f: impl Fn(&DVector<f64>) -> f64) -> DVector<f64> {
    let step = 1e-5;
    DVector::from_iterator(
        v.len(),
        (0..v.len()).map(|i| {
            let mut a = v.clone();
            let mut b = v.clone();
            a[i] += step;
            b[i] -= step;
            (f(&a) - f(&b)) / (2.0 * step)
        }),
    )
}

fn rel_err(fd: &DVector<f64>, an: &DVector<f64>) -> f64 {
    (fd - an).norm() / an.norm().max(1e-6)
}

#[test]
fn criterion_6_derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut e_v, mut e_pi, mut e_p, mut e_h): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..100 {
        let d = rng.random_range(2..=6);
        let t = rng.random_range(0..=10);
        let lambda = [1.0, 2.0, 16.0][rng.random_range(0..3)];
        let mu = 7.0;
        let (h, w) = random_instance(&mut rng, d, t, lambda);
        let params = HyperParams::new(lambda, mu);
        let v = to_solid(&w).to_vector();
        let at =
            |u: &DVector<f64>| RoundState::build_at(&h, &ReparamPoint::from_vector(u)).unwrap();
        let s = at(&v);

        let fd = central_diff(&v, |u| at(u).volumetric_value());
        e_v = e_v.max(rel_err(&fd, &s.volumetric_gradient()));

        let k = rng.random_range(0..s.term_count());
        let term = s.term_at(k);
        let fd = central_diff(&v, |u| at(u).leverage()[k]);
        e_pi = e_pi.max(rel_err(&fd, &s.leverage_gradient(term).unwrap()));

        let fd = central_diff(&v, |u| {
            vbftrl::barrier::potential_p(&h, &params, &to_simplex(&ReparamPoint::from_vector(u)))
                .unwrap()
        });
        let an = vbftrl::barrier::potential_p_gradient(&h, &params, &w).unwrap();
        e_p = e_p.max(rel_err(&fd, &an));

        let m = v.len();
        let mut fd_h = DMatrix::zeros(m, m);
        for j in 0..m {
            let col = central_diff(&v, |u| at(u).volumetric_gradient()[j]);
            fd_h.set_row(j, &col.transpose());
        }
        let hv = s.volumetric_hessian();
        e_h = e_h.max((&fd_h - &hv).norm() / hv.norm().max(1e-6));
    }
    let pass = e_v <= 1e-4 && e_pi <= 1e-4 && e_p <= 1e-4 && e_h <= 1e-4;
    report(
        "6 (derivatives vs central differences)",
        pass,
        format!("grad V {e_v:.1e}, grad pi {e_pi:.1e}, grad P {e_p:.1e}, hess V {e_h:.1e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_7_quadrature_reference() {
    let mut cfg = StrategyConfig::new(StrategyKind::CoverQuad, HyperParams::new(0.0, 1.0));
    cfg.quad_resolution = Some(400);
    let mut s = StrategyState::new(cfg.clone(), 2).unwrap();
    s.next_portfolio().unwrap();
    s.observe(&[1.0, 0.0]).unwrap();
    let first = s.next_portfolio().unwrap().weights()[0];
    let mut pass = (first - 2.0 / 3.0).abs() <= 1e-3;

    let bound = generalized_cover_bound(0.0, 1.0, 2, 200);
    let mut markets: Vec<MarketSequence> = SEEDS
        .iter()
        .map(|&s| gen_iid_lognormal(2, 200, 0.5, s).unwrap())
        .collect();
    markets.push(gen_two_asset_switch(200).unwrap());
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut check = |r: RegretReport| {
        let ok = r.regret.is_finite() && r.regret <= bound + 0.05 + r.best_crp_gap_bound + 1e-6;
        worst = worst.max(r.regret);
        ok
    };
    for m in &markets {
        pass &= check(run_game(&cfg, Market::Oblivious(m), false).unwrap());
    }
    let mut adv = WorstCoordinate { d: 2 };
    pass &= check(
        run_game(
            &cfg,
            Market::Adaptive {
                adversary: &mut adv,
                horizon: 200,
            },
            false,
        )
        .unwrap(),
    );
    report(
        "7 (quadrature reference)",
        pass,
        format!("first update {first:.6}, max regret {worst:.4} vs bound {bound:.4} + 0.05"),
    );
    assert!(pass);
}

#[test]
fn criterion_8_entry_floor() {
    let mut histories: Vec<Vec<Vec<f64>>> = exact_grid()
        .iter()
        .map(|(_, r)| r.returns.clone())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let d = rng.random_range(2..=6);
        let t = rng.random_range(1..=60);
        histories.push(random_instance(&mut rng, d, t, 1.0).0.returns().to_vec());
    }
    let mut slack = f64::INFINITY;
    let mut count = 0;
    for rounds in &histories {
        let d = rounds[0].len();
        for lambda in [1.0, 16.0] {
            let h = LossHistory::with_returns(d, lambda, rounds).unwrap();
            let out = minimize_from_uniform(&h, &HyperParams::new(lambda, 0.0)).unwrap();
            let floor = lambda / (rounds.len() as f64 + lambda * d as f64);
            slack = slack.min(out.portfolio().min_entry() - floor);
            count += 1;
        }
    }
    let pass = slack >= -1e-10;
    report(
        "8 (entry floor of the barrier-regularized leader)",
        pass,
        format!("{count} minimizers, min(entry - floor) = {slack:.3e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_9_best_crp_matches_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_excess: f64 = f64::NEG_INFINITY;
    let mut pass = true;
    for i in 0..20u64 {
        let t = [50, 200][(i % 2) as usize];
        let vol = rng.random_range(0.05..1.0);
        let m = if i % 5 == 4 {
            let rows = (0..t)
                .map(|_| {
                    if rng.random_bool(0.7) {
                        vec![1.0, 0.0]
                    } else {
                        vec![rng.random_range(0.2..2.0), 1.0]
                    }
                })
                .collect();
            MarketSequence::new(2, rows, Provenance::Synthetic, None).unwrap()
        } else {
            gen_iid_lognormal(2, t, vol, 1000 + i).unwrap()
        };
        let crp = best_crp(&m).unwrap();
        let grid_min = (0..=2000)
            .map(|k| {
                let p = k as f64 / 2000.0;
                m.rounds()
                    .iter()
                    .map(|x| -(p * x[0] + (1.0 - p) * x[1]).ln())
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        let excess = (crp.loss - grid_min).abs() - crp.gap_bound;
        worst_excess = worst_excess.max(excess);
        pass &= excess <= 1e-6;
    }
    report(
        "9 (best-CRP oracle vs 2001-point grid)",
        pass,
        format!("max |loss - grid| - gap_bound = {worst_excess:.3e}"),
    );
    assert!(pass);
}

fn median_secs(mut f: impl FnMut(), reps: usize) -> f64 {
    f();
    let mut times: Vec<f64> = (0..reps)
        .map(|_| {
            let s = Instant::now();
            f();
            s.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[reps / 2]
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

fn one_step_time(d: usize, t: usize) -> f64 {
    let m = gen_iid_lognormal(d, t, 0.3, 5).unwrap();
    let h = LossHistory::with_returns(d, 560.0, m.rounds()).unwrap();
    let mut p = HyperParams::new(560.0, 2.0);
    p.steps = 1;
    let w = Portfolio::uniform(d);
    median_secs(
        || {
            std::hint::black_box(quasi_newton_round(&h, &p, &w).unwrap());
        },
        15,
    )
}

#[test]
fn criterion_runtime_scaling() {
    let ds = [4usize, 8, 16, 32];
    let t_fixed = 1000;
    let time_d: Vec<f64> = ds.iter().map(|&d| one_step_time(d, t_fixed)).collect();
    let ts: Vec<usize> = (1..=10).map(|k| 100 * k).collect();
    let time_t: Vec<f64> = ts.iter().map(|&t| one_step_time(8, t)).collect();
    let sd = slope(&ds.map(|d| d as f64), &time_d);
    let st = slope(&ts.iter().map(|&t| t as f64).collect::<Vec<_>>(), &time_t);
    let pass = sd <= 2.4 && st <= 1.4;
    report(
        "runtime scaling (quasi-Newton step)",
        pass,
        format!("log-log slope in d {sd:.2} (<= 2.4), in t {st:.2} (<= 1.4)"),
    );
    assert!(pass);
}
