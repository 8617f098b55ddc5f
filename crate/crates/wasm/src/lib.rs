//! Browser bindings. Every export returns a JSON string.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};
use twinzyg::models::{DataSource, TrainingConfig};
use twinzyg::seed;
use twinzyg::selection::{hill_climb_ensemble, SelectionConfig};
use twinzyg::simulate::{generate_dataset, study_preset, SharingMode, SimulationConfig};
use twinzyg::{build_design, fit_csr, normalize_time_series, reconstruct, snr};
use wasm_bindgen::prelude::*;

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

/// Fit a noisy two-tone signal with `degree` cosine terms.
pub fn fit_signal(samples: usize, degree: usize, noise: f64, seed: u64) -> Result<Value, String> {
    if samples < 2 {
        return Err("need at least two samples".into());
    }
    let mut rng = seed::stream(seed, "demo/signal", 0);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let raw = DMatrix::from_fn(samples, 1, |j, _| {
        let t = j as f64 / (samples - 1) as f64;
        let clean = (2.0 * std::f64::consts::PI * 3.0 * t + phase).sin() + 0.5 * (2.0 * std::f64::consts::PI * 7.0 * t).cos();
        let e: f64 = StandardNormal.sample(&mut rng);
        clean + noise * e
    });
    let z = normalize_time_series(raw).map_err(|e| e.to_string())?;
    let design = build_design(z.grid(), degree).map_err(|e| e.to_string())?;
    let c = fit_csr(&z, &design).map_err(|e| e.to_string())?;
    let fitted = reconstruct(&c, &design).map_err(|e| e.to_string())?;
    let ratio = snr(&z, &fitted).map_err(|e| e.to_string())?.mean;
    Ok(json!({
        "t": z.grid().points(),
        "signal": z.values().as_slice(),
        "fitted": fitted.values().as_slice(),
        "coefficients": c.matrix().as_slice(),
        "snr": if ratio.is_finite() { json!(ratio) } else { Value::Null },
    }))
}

fn simulation(study: u8, sharing: &str, pairs: usize, seed: u64) -> Result<SimulationConfig, String> {
    let sharing: SharingMode = sharing.parse()?;
    let base = study_preset(study).map_err(|e| e.to_string())?;
    Ok(SimulationConfig { pairs_mz: pairs, pairs_dz: pairs, sharing, seed, ..base })
}

/// Per-region twin correlations of a simulated cohort, split by zygosity.
pub fn twin_correlations(study: u8, sharing: &str, pairs: usize, seed: u64) -> Result<Value, String> {
    let cfg = simulation(study, sharing, pairs, seed)?;
    let data = generate_dataset(&cfg).map_err(|e| e.to_string())?;
    let regions = data.dim();
    let mut mz = vec![Vec::new(); regions];
    let mut dz = vec![Vec::new(); regions];
    for (x, &t) in data.features().iter().zip(data.labels()) {
        let target = if t == 1 { &mut mz } else { &mut dz };
        for (k, &v) in x.iter().enumerate() {
            target[k].push(v);
        }
    }
    Ok(json!({ "mz": mz, "dz": dz, "dz_multipliers": cfg.dz_multipliers }))
}

/// Importance ranking from a few hill-climbing runs on simulated data.
pub fn rank_regions(study: u8, sharing: &str, runs: usize, seed: u64) -> Result<Value, String> {
    if runs == 0 || runs > 50 {
        return Err("runs must be between 1 and 50".into());
    }
    let sim = simulation(study, sharing, 50, seed)?;
    let small = TrainingConfig { hidden: 10, ..Default::default() };
    let cfg = SelectionConfig { runs, candidate_training: small, final_training: small, seed, ..Default::default() };
    let s = hill_climb_ensemble(&DataSource::Simulated(sim), &cfg).map_err(|e| e.to_string())?;
    let order: Vec<Vec<usize>> = s.runs.iter().map(|r| r.trace.order()).collect();
    Ok(json!({
        "importance": s.importance.scores,
        "order": s.importance.order,
        "gamma": s.gamma.counts,
        "runs": order,
        "optimal_accuracy": s.optimal.accuracy.mean,
        "full_accuracy": s.full.accuracy.mean,
    }))
}

#[wasm_bindgen]
pub fn csr_demo(samples: usize, degree: usize, noise: f64, seed: u32) -> Result<String, JsError> {
    to_js(fit_signal(samples, degree, noise, seed.into()))
}

#[wasm_bindgen]
pub fn simulate_correlations(study: u8, sharing: &str, pairs: usize, seed: u32) -> Result<String, JsError> {
    to_js(twin_correlations(study, sharing, pairs, seed.into()))
}

#[wasm_bindgen]
pub fn hill_climb_demo(study: u8, sharing: &str, runs: usize, seed: u32) -> Result<String, JsError> {
    to_js(rank_regions(study, sharing, runs, seed.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_signal_shapes() {
        let v = fit_signal(200, 20, 0.3, 1).unwrap();
        assert_eq!(v["t"].as_array().unwrap().len(), 200);
        assert_eq!(v["fitted"].as_array().unwrap().len(), 200);
        assert_eq!(v["coefficients"].as_array().unwrap().len(), 21);
        assert!(v["snr"].as_f64().unwrap() > 1.0);
        assert!(fit_signal(10, 20, 0.3, 1).is_err());
    }

    #[test]
    fn correlations_split_by_zygosity() {
        let v = twin_correlations(2, "independent", 30, 4).unwrap();
        let mz = v["mz"].as_array().unwrap();
        assert_eq!(mz.len(), 5);
        assert_eq!(mz[0].as_array().unwrap().len(), 30);
        assert!(twin_correlations(2, "sideways", 30, 4).is_err());
    }

    #[test]
    fn ranking_is_deterministic() {
        let a = rank_regions(3, "independent", 2, 7).unwrap();
        assert_eq!(a, rank_regions(3, "independent", 2, 7).unwrap());
        assert_eq!(a["order"].as_array().unwrap().len(), 5);
        assert!(rank_regions(3, "independent", 0, 7).is_err());
    }
}
