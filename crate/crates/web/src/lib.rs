//! Browser bindings for the demo page in `www/`. Every export returns a JSON
//! string; failures come back as `{"error": "..."}`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use qicert::certificate::{
    check_hypotheses, constants_comparison, tune_parameters, CoherenceStats, TheoremParams,
};
use qicert::ensembles::{gen_matrix, EnsembleSpec};
use qicert::montecarlo::{failure_probability_experiment, linspace, DEFAULT_GAMMA};

/// Largest matrix the page will sample from, to keep the tab responsive.
pub const MAX_DEMO_ENTRIES: usize = 128 * 256;

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

/// Our caps on `(C_s, C_μ)` beside the competing constants.
#[wasm_bindgen]
pub fn constants(alpha: f64, r: f64) -> String {
    respond(
        constants_comparison(alpha, r)
            .map(|c| {
                json!({
                    "ours": { "c_s": c.c_s_ours, "c_mu": c.c_mu_ours },
                    "competing": { "c_s": c.c_s_cp, "c_mu": c.c_mu_cp },
                    "ratio": { "c_s": c.c_s_ratio(), "c_mu": c.c_mu_ratio() },
                })
            })
            .map_err(|e| e.to_string()),
    )
}

/// Hypothesis check and tuning from `(μ, ‖X‖², p)` alone.
#[wasm_bindgen]
pub fn certify_scalars(mu: f64, op_norm_sq: f64, p: f64, r: f64, alpha: f64, s: f64) -> String {
    let run = || -> Result<Value, String> {
        let count = |x: f64, name: &str| {
            if x >= 1.0 && x.fract() == 0.0 && x <= 9.0e15 {
                Ok(x as usize)
            } else {
                Err(format!("{name} must be a positive integer"))
            }
        };
        let (p, s) = (count(p, "p")?, count(s, "s")?);
        if op_norm_sq.is_nan() || op_norm_sq < 0.0 {
            return Err("||X||^2 must be nonnegative".into());
        }
        let stats =
            CoherenceStats::from_scalars(mu, op_norm_sq.sqrt(), p, p).map_err(|e| e.to_string())?;
        let params = TheoremParams::new(r, alpha, s, p).map_err(|e| e.to_string())?;
        let hyp = check_hypotheses(&stats, &params).map_err(|e| e.to_string())?;
        let tuning = tune_parameters(&stats, &params).map_err(|e| e.to_string())?;
        Ok(json!({ "hypotheses": hyp, "tuning": tuning }))
    };
    respond(run())
}

/// Empirical `P(‖X_TᵗX_T − I‖ ≥ r)` on `k` thresholds in `(0, r_max]` for
/// a seeded `gaussian_unit(n, p)` matrix.
#[wasm_bindgen]
pub fn failure_curve(
    n: usize,
    p: usize,
    s: usize,
    r_max: f64,
    k: usize,
    trials: u32,
    seed: u32,
) -> String {
    let run = || -> Result<Value, String> {
        if n == 0 || p == 0 || n * p > MAX_DEMO_ENTRIES {
            return Err(format!("n*p must lie in [1, {MAX_DEMO_ENTRIES}]"));
        }
        if r_max.is_nan() || r_max <= 0.0 || !(2..=64).contains(&k) {
            return Err("need r_max > 0 and 2 <= k <= 64".into());
        }
        let x = gen_matrix(&EnsembleSpec::gaussian_unit(n, p, u64::from(seed)))
            .map_err(|e| e.to_string())?;
        let grid = linspace(r_max / k as f64, r_max, k);
        let tails = failure_probability_experiment(
            &x,
            s,
            &grid,
            u64::from(trials),
            u64::from(seed),
            DEFAULT_GAMMA,
        )
        .map_err(|e| e.to_string())?;
        Ok(json!({
            "r": grid,
            "p_hat": tails.iter().map(|t| t.p_hat).collect::<Vec<_>>(),
            "upper": tails.iter().map(|t| t.upper).collect::<Vec<_>>(),
        }))
    };
    respond(run())
}
