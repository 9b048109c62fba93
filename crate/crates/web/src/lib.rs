//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string so the page needs no generated types.

use behavior_epi::analysis::{self, classify};
use behavior_epi::integrator::wave_metrics;
use behavior_epi::params::ModelParams;
use behavior_epi::state::InitialConditions;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn params_or_baseline(params_json: &str) -> Result<ModelParams, String> {
    if params_json.trim().is_empty() {
        return Ok(ModelParams::nyc_two_group());
    }
    ModelParams::from_json(params_json).map_err(|e| e.to_string())
}

pub fn baseline_json(model: &str) -> Result<String, String> {
    match model {
        "two-group" => Ok(ModelParams::nyc_two_group().to_json()),
        "behavior-free" => Ok(ModelParams::nyc_behavior_free().to_json()),
        other => Err(format!("unknown model {other:?}")),
    }
}

/// Daily series of total Ih, deaths and per-group contact modifiers.
pub fn simulate_json(params_json: &str, k: f64, days: u32) -> Result<String, String> {
    let p = params_or_baseline(params_json)?;
    if !(0.0..=1.0).contains(&k) {
        return Err(format!("k = {k} outside [0, 1]"));
    }
    if days == 0 || days > 2000 {
        return Err("days must be in 1..=2000".into());
    }
    let n = p.groups();
    let ic = InitialConditions { k, ..InitialConditions::default() };
    let st = ic.build(n).map_err(|e| e.to_string())?;
    let tr = behavior_epi::integrate(&p, &st, days as f64, 1.0).map_err(|e| e.to_string())?;
    let w = wave_metrics(&tr, (0.0, days as f64)).map_err(|e| e.to_string())?;
    let contact: Vec<Vec<f64>> = (0..n).map(|g| tr.contact.iter().map(|c| c[g]).collect()).collect();
    let share: Vec<Vec<f64>> = (0..n).map(|g| tr.group_share.iter().map(|s| s[g]).collect()).collect();
    Ok(json!({
        "day": tr.times,
        "ih": tr.ih_total,
        "deaths": tr.deaths,
        "contact": contact,
        "share": share,
        "peak": w.peak_daily_hosp,
        "peak_day": w.peak_day,
        "total_deaths": w.cum_mortality,
    })
    .to_string())
}

/// R₀, R_c per lockdown phase and the influence ratio.
pub fn reproduction_json(params_json: &str) -> Result<String, String> {
    let p = params_or_baseline(params_json)?;
    let r0 = analysis::basic_reproduction_number(&p).map_err(|e| e.to_string())?;
    let phases: Vec<_> = p
        .theta
        .segments()
        .iter()
        .map(|s| {
            analysis::control_reproduction_number(&p, s.value)
                .map(|rc| json!({ "start_day": s.start_day, "theta": s.value, "r_c": rc }))
                .map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    let gamma = analysis::influence_ratio(&p).ok();
    Ok(json!({ "r0": r0, "phases": phases, "gamma": gamma }).to_string())
}

/// Attracting equilibrium label on a `steps × steps` grid of (Γ, R_c).
pub fn stability_map_json(g_max: f64, r_max: f64, steps: u32) -> Result<String, String> {
    if !(g_max > 0.0 && r_max > 0.0) || !(2..=400).contains(&steps) {
        return Err("need positive extents and 2..=400 steps".into());
    }
    let axis = |max: f64| -> Vec<f64> { (1..=steps).map(|i| max * i as f64 / steps as f64).collect() };
    let (gs, rs) = (axis(g_max), axis(r_max));
    let labels: Vec<Vec<&str>> =
        rs.iter().map(|&r| gs.iter().map(|&g| classify(g, r).label()).collect()).collect();
    Ok(json!({ "gamma": gs, "r_c": rs, "labels": labels }).to_string())
}

#[wasm_bindgen]
pub fn baseline(model: &str) -> Result<String, JsError> {
    baseline_json(model).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(params_json: &str, k: f64, days: u32) -> Result<String, JsError> {
    simulate_json(params_json, k, days).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn reproduction(params_json: &str) -> Result<String, JsError> {
    reproduction_json(params_json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn stability_map(g_max: f64, r_max: f64, steps: u32) -> Result<String, JsError> {
    stability_map_json(g_max, r_max, steps).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn baseline_round_trips_through_simulate() {
        let p = baseline_json("two-group").unwrap();
        let v = parse(&simulate_json(&p, 0.0, 150).unwrap());
        assert_eq!(v["day"].as_array().unwrap().len(), 151);
        assert_eq!(v["contact"].as_array().unwrap().len(), 2);
        let peak = v["peak"].as_f64().unwrap();
        assert!(peak > 1000.0 && peak < 2500.0, "{peak}");
        assert!(simulate_json("{", 0.0, 10).is_err());
        assert!(simulate_json("", 2.0, 10).is_err());
        assert!(baseline_json("three-group").is_err());
    }

    #[test]
    fn reproduction_lists_every_phase() {
        let v = parse(&reproduction_json(&baseline_json("behavior-free").unwrap()).unwrap());
        let phases = v["phases"].as_array().unwrap();
        assert_eq!(phases.len(), 5);
        assert!((phases[0]["r_c"].as_f64().unwrap() - v["r0"].as_f64().unwrap()).abs() < 1e-12);
        assert!(v["gamma"].is_null());
    }

    #[test]
    fn stability_map_shape() {
        let v = parse(&stability_map_json(2.0, 2.0, 4).unwrap());
        let labels = v["labels"].as_array().unwrap();
        assert_eq!(labels.len(), 4);
        assert_eq!(labels[0][0], "G2DFE");
        assert_eq!(labels[0][3], "G1DFE");
        assert_eq!(labels[3][0], "TDFE");
        assert!(stability_map_json(2.0, 2.0, 1).is_err());
    }
}
