//! Browser demo: curve shortening of planar curves, the shrinker residual
//! of catalog examples, and the Lagrangian angle of a graph over T².
//!
//! Each export returns a JSON string; `www/main.js` draws it on a canvas.

use codimflow::flow::{estimate_singular_time, Flow, FlowConfig, Integrator};
use codimflow::grid::{make_chart, ChartSpec};
use codimflow::lagrangian::{lagrangian_angle, Potential};
use codimflow::singularity::{
    classify_blowup, example, soliton_residual, BlowupClass, ExampleParams, SolitonKind,
};
use codimflow::Error;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Flows a closed plane curve until its curvature blows up and returns
/// `frames` evenly spaced polylines plus the blow-up classification.
pub fn curve_flow_json(name: &str, param: f64, n: usize, frames: usize) -> Result<String, Error> {
    let mut params = ExampleParams::new().with_resolution(&[n]);
    match name {
        "ellipse" => params = params.with("a", param).with("b", 1.0),
        "cardioid" => params = params.with("a", param),
        _ => params = params.with("radius", param),
    }
    let ex = example(name, &params)?;
    if ex.imm.n() != 2 || ex.imm.m() != 1 {
        return Err(Error::Usage(format!("'{name}' is not a plane curve")));
    }
    let cfg = FlowConfig {
        integrator: Integrator::SemiImplicit,
        curvature_cap_rho: 0.01,
        stop_max_a2: 1e4,
        record_every: 10,
        snapshot_every: 1,
        ..FlowConfig::default()
    };
    let mut flow = Flow::new(ex.imm, cfg)?;
    flow.advance(None)?;
    let trace = flow.trace();
    let snaps = &trace.snapshots;
    let stride = (snaps.len() / frames.max(1)).max(1);
    let polylines: Vec<_> = snaps
        .iter()
        .step_by(stride)
        .chain(snaps.last())
        .map(|s| json!({ "t": s.t, "xy": s.imm.values() }))
        .collect();
    let t_hat = estimate_singular_time(trace).ok().map(|e| e.t_hat);
    let class =
        t_hat
            .and_then(|t| classify_blowup(trace, t).ok())
            .map(|r| match r.classification {
                BlowupClass::TypeI { c_hat } => format!("Type I (|A|²(T−t) → {c_hat:.3})"),
                BlowupClass::TypeII => "Type II".to_string(),
                BlowupClass::Inconclusive => "inconclusive".to_string(),
            });
    Ok(json!({
        "frames": polylines,
        "termination": trace.termination,
        "t_hat": t_hat,
        "classification": class,
        "steps": flow.state().step_index,
    })
    .to_string())
}

/// L∞ and L² shrinker residual H + F⊥ of a catalog example.
pub fn shrinker_residual_json(name: &str, radius: f64) -> Result<String, Error> {
    let ex = example(name, &ExampleParams::new().with("radius", radius))?;
    let r = soliton_residual(&ex.imm, &SolitonKind::Shrinker)?;
    Ok(json!({ "name": name, "radius": radius, "linf": r.linf, "l2": r.l2, "nodes": ex.imm.node_count() }).to_string())
}

/// Lagrangian angle of u = ½(s1 x₁² + s2 x₂²) + amp·sin x₁ sin x₂ on an n×n torus.
pub fn lagrangian_angle_json(s1: f64, s2: f64, amp: f64, n: usize) -> Result<String, Error> {
    let chart = make_chart(&ChartSpec::torus(&[n, n]))?;
    let p = Potential::from_fn(chart, vec![s1, 0.0, 0.0, s2], |x| {
        amp * x[0].sin() * x[1].sin()
    })?;
    let a = lagrangian_angle(&p)?;
    Ok(
        json!({ "n": n, "alpha": a.alpha.values(), "identity_defect": a.identity_defect })
            .to_string(),
    )
}

#[wasm_bindgen]
pub fn curve_flow(name: &str, param: f64, n: usize, frames: usize) -> Result<String, JsError> {
    curve_flow_json(name, param, n, frames).map_err(js)
}

#[wasm_bindgen]
pub fn shrinker_residual(name: &str, radius: f64) -> Result<String, JsError> {
    shrinker_residual_json(name, radius).map_err(js)
}

#[wasm_bindgen]
pub fn lagrangian_angle_grid(s1: f64, s2: f64, amp: f64, n: usize) -> Result<String, JsError> {
    lagrangian_angle_json(s1, s2, amp, n).map_err(js)
}
