//! Browser bindings for the regret harness. The plain functions hold the
//! logic and are tested natively; the `#[wasm_bindgen]` wrappers only map
//! errors to JS exceptions.

use vbftrl::barrier::{HyperParams, LossHistory, RoundState};
use vbftrl::geometry::Portfolio;
use vbftrl::harness::{run_game, to_json, Market};
use vbftrl::markets::{gen_iid_lognormal, gen_two_asset_switch, WorstCoordinate};
use vbftrl::solver::minimize_from_uniform;
use vbftrl::strategies::{StrategyConfig, StrategyKind};
use vbftrl::{Error, Result};
use wasm_bindgen::prelude::*;

fn rows(flat: &[f64], d: usize) -> Result<Vec<Vec<f64>>> {
    if d < 2 || !flat.len().is_multiple_of(d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: flat.len(),
        });
    }
    Ok(flat.chunks(d).map(<[f64]>::to_vec).collect())
}

/// Plays one game and returns the JSON report.
pub fn play_game(algo: &str, market: &str, d: usize, horizon: usize, seed: u64) -> Result<String> {
    let kind: StrategyKind = algo.parse()?;
    let config = match kind {
        StrategyKind::VbftrlQn => StrategyConfig::vbftrl_qn(horizon, d),
        StrategyKind::CoverQuad => {
            let mut c = StrategyConfig::new(kind, HyperParams::new(0.0, 1.0));
            c.quad_resolution = Some(if d == 2 { 200 } else { 40 });
            c
        }
        _ => StrategyConfig::new(kind, HyperParams::exact_preset()),
    };
    let report = match market {
        "adversary" => {
            let mut adv = WorstCoordinate { d };
            run_game(
                &config,
                Market::Adaptive {
                    adversary: &mut adv,
                    horizon,
                },
                false,
            )?
        }
        "switch" => run_game(
            &config,
            Market::Oblivious(&gen_two_asset_switch(horizon)?),
            false,
        )?,
        "iid" => run_game(
            &config,
            Market::Oblivious(&gen_iid_lognormal(d, horizon, 0.2, seed)?),
            false,
        )?,
        other => return Err(Error::InvalidParameter(format!("unknown market `{other}`"))),
    };
    to_json(&report)
}

/// The regularized objective on a triangular grid over the 3-asset simplex.
/// Entry `i * (res + 1) + j` is the value at weights `(i, j, res - i - j) / res`;
/// boundary and out-of-triangle cells are NaN.
pub fn potential_grid(returns: &[f64], lambda: f64, mu: f64, res: usize) -> Result<Vec<f64>> {
    let h = LossHistory::with_returns(3, lambda, &rows(returns, 3)?)?;
    let n = res + 1;
    let mut out = vec![f64::NAN; n * n];
    for i in 1..res {
        for j in 1..res - i {
            let w = Portfolio::new(vec![
                i as f64 / res as f64,
                j as f64 / res as f64,
                (res - i - j) as f64 / res as f64,
            ])?;
            out[i * n + j] = RoundState::build(&h, &w)?.potential_value(mu);
        }
    }
    Ok(out)
}

/// The minimizer of the regularized objective after the given rounds.
pub fn leader(returns: &[f64], d: usize, lambda: f64, mu: f64) -> Result<Vec<f64>> {
    let h = LossHistory::with_returns(d, lambda, &rows(returns, d)?)?;
    let out = minimize_from_uniform(&h, &HyperParams::new(lambda, mu))?;
    Ok(out.portfolio().weights().to_vec())
}

/// Leverage score of every round, then of every barrier term, at `w`.
pub fn leverage(returns: &[f64], w: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let d = w.len();
    let h = LossHistory::with_returns(d, lambda, &rows(returns, d)?)?;
    let w = Portfolio::new(w.to_vec())?;
    Ok(RoundState::build(&h, &w)?.leverage().to_vec())
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = playGame)]
pub fn play_game_js(
    algo: &str,
    market: &str,
    d: usize,
    horizon: usize,
    seed: u64,
) -> std::result::Result<String, JsError> {
    play_game(algo, market, d, horizon, seed).map_err(js)
}

#[wasm_bindgen(js_name = potentialGrid)]
pub fn potential_grid_js(
    returns: &[f64],
    lambda: f64,
    mu: f64,
    res: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    potential_grid(returns, lambda, mu, res).map_err(js)
}

#[wasm_bindgen(js_name = leader)]
pub fn leader_js(
    returns: &[f64],
    d: usize,
    lambda: f64,
    mu: f64,
) -> std::result::Result<Vec<f64>, JsError> {
    leader(returns, d, lambda, mu).map_err(js)
}

#[wasm_bindgen(js_name = leverage)]
pub fn leverage_js(
    returns: &[f64],
    w: &[f64],
    lambda: f64,
) -> std::result::Result<Vec<f64>, JsError> {
    leverage(returns, w, lambda).map_err(js)
}
