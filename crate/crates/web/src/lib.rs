//! Browser bindings for a few quick design calculations.
//!
//! Every function returns a flat `Float64Array` so the page can draw it
//! straight onto a canvas.

use multiout::analysis::{PreparedDesign, Realisation};
use multiout::dtl::cp_boundary;
use multiout::{
    calibrate_c, conditional_power, realise_gs_design, simulate_null_block, wang_tsiatis_boundaries,
    CalibrationOptions, GsDesignSpec, LfcMode, OutcomeModel, SimConfig, StageSchedule,
};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Wang–Tsiatis boundaries as `[f_1..f_J, e_1..e_J]`.
#[wasm_bindgen]
pub fn boundaries(constant: f64, stages: usize, shape: f64) -> Result<Vec<f64>, JsError> {
    let b = wang_tsiatis_boundaries(constant, stages, shape).map_err(js_err)?;
    Ok(b.lower.into_iter().chain(b.upper).collect())
}

/// Conditional power over `steps` evenly spaced interim statistics in
/// `[z_from, z_to]`, followed by the interim boundaries for `cp_lower` and
/// `cp_upper`: `[cp_1..cp_steps, f, e]`. Stage sizes are `n` and `2n` with unit variance.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn cp_curve(
    r: f64,
    per_stage: f64,
    delta1: f64,
    cp_lower: f64,
    cp_upper: f64,
    z_from: f64,
    z_to: f64,
    steps: usize,
) -> Result<Vec<f64>, JsError> {
    if steps < 2 || z_to <= z_from {
        return Err(JsError::new("need steps >= 2 and z_to > z_from"));
    }
    let (i1, i2) = (per_stage, 2.0 * per_stage);
    let mut out = Vec::with_capacity(steps + 2);
    for s in 0..steps {
        let z = z_from + (z_to - z_from) * s as f64 / (steps - 1) as f64;
        out.push(conditional_power(z, r, i1, i2, delta1).map_err(js_err)?);
    }
    out.push(cp_boundary(cp_lower, r, i1, i2, delta1));
    out.push(cp_boundary(cp_upper, r, i1, i2, delta1));
    Ok(out)
}

/// Rejection probability of a two-outcome, three-stage, 1-of-2 design over a
/// `steps x steps` grid of true effects on `[0, mu_max]^2`.
///
/// `C` is calibrated to `alpha` first. Returns `[C, p(0,0), p(0,h), ...]`
/// with the second effect varying fastest.
#[wasm_bindgen]
pub fn rejection_surface(
    per_stage: usize,
    rho: f64,
    alpha: f64,
    nsims: usize,
    seed: u64,
    mu_max: f64,
    steps: usize,
) -> Result<Vec<f64>, JsError> {
    if steps < 2 || mu_max <= 0.0 {
        return Err(JsError::new("need steps >= 2 and mu_max > 0"));
    }
    let spec = GsDesignSpec {
        stages: 3,
        outcomes: 2,
        required: 1,
        shape: 0.0,
        alpha,
        beta: 0.2,
        delta0: vec![0.2; 2],
        delta1: vec![0.4; 2],
        composite: false,
    };
    spec.validate().map_err(js_err)?;
    let model = OutcomeModel::standard(2, rho).map_err(js_err)?;
    let cfg = SimConfig::new(seed, nsims);
    let null = simulate_null_block(&StageSchedule::equal(1, 3).map_err(js_err)?, &model, &cfg).map_err(js_err)?;
    let (c, _) = calibrate_c(&null, &spec, &CalibrationOptions::default()).map_err(js_err)?;
    let design = realise_gs_design(&spec, &model, &cfg, per_stage, c, LfcMode::FirstM).map_err(js_err)?;
    let prepared = PreparedDesign::new(Realisation::Gs(design)).map_err(js_err)?;
    let h = mu_max / (steps - 1) as f64;
    let mut out = Vec::with_capacity(1 + steps * steps);
    out.push(c);
    for a in 0..steps {
        for b in 0..steps {
            let p = prepared.evaluate(&[a as f64 * h, b as f64 * h]).map_err(js_err)?;
            out.push(p.p_reject);
        }
    }
    Ok(out)
}
