//! Browser bindings: dipole impedance sweep, array optimization and sensitivity maps.
//! Every export returns a JSON string so the page needs no glue beyond `JSON.parse`.

use memdes::bounds::realized_gain_bound;
use memdes::global::memetic_optimize;
use memdes::linalg::C64;
use memdes::local::sensitivity_map;
use memdes::objectives::Evaluator;
use memdes::opgen::{gen_wire_array, WireArray};
use memdes::oracle::{dense_objective, dense_solve};
use memdes::reanalysis::init_state;
use memdes::{ObjectiveSpec, OperatorBundle, Result, RunConfig, Word};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const Z0: f64 = 50.0;

fn z0() -> C64 {
    C64::new(Z0, 0.0)
}

fn db(x: f64) -> f64 {
    10.0 * x.max(1e-300).log10()
}

fn array(n_dipoles: usize, spacing: f64, segments: usize) -> Result<OperatorBundle> {
    let segments = segments | 1;
    gen_wire_array(&WireArray { segments_per_dipole: segments, ..WireArray::new(n_dipoles, spacing) })
}

#[derive(Debug, Serialize)]
pub struct ImpedancePoint {
    pub length: f64,
    pub r: f64,
    pub x: f64,
}

/// Input impedance of a single center-fed dipole over a range of ℓ/λ.
pub fn impedance_sweep(l_min: f64, l_max: f64, samples: usize, segments: usize) -> Result<Vec<ImpedancePoint>> {
    let samples = samples.max(2);
    (0..samples)
        .map(|k| {
            let length = l_min + (l_max - l_min) * k as f64 / (samples - 1) as f64;
            let p = WireArray { length_over_lambda: length, segments_per_dipole: segments | 1, ..WireArray::new(1, 0.25) };
            let b = gen_wire_array(&p)?;
            let i = dense_solve(&b, &Word::ones(b.n_opt()), 0)?;
            let feed = p.feed_index();
            let z = b.excitations[0][feed] / i[feed];
            Ok(ImpedancePoint { length, r: z.re, x: z.im })
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct ArrayResult {
    pub spacing: f64,
    pub n_dipoles: usize,
    pub segments: usize,
    pub feed: usize,
    /// Enabled flag per DOF, feed included.
    pub enabled: Vec<bool>,
    pub best_word: String,
    pub gain_db: f64,
    pub full_array_db: f64,
    pub bound_db: Option<f64>,
    /// Best realized gain after each global iteration.
    pub history_db: Vec<f64>,
    pub iterations: usize,
    pub evaluations: u64,
}

/// Realized gain of a 3-dipole array optimized by the memetic algorithm.
pub fn optimize(spacing: f64, segments: usize, seed: u64, agents: usize, iterations: usize) -> Result<ArrayResult> {
    let b = array(3, spacing, segments)?;
    let spec = ObjectiveSpec::realized_gain(0, z0());
    let cfg = RunConfig {
        n_agents: agents.max(2),
        max_global_iters: iterations.max(1),
        rng_seed: seed,
        init_fill_probability: 0.9,
        ..RunConfig::default()
    };
    let r = memetic_optimize(&b, &spec, &cfg)?;
    let mut history_db = Vec::new();
    for row in &r.rows {
        if history_db.len() < row.iter {
            history_db.push(f64::NEG_INFINITY);
        }
        let last = history_db.last_mut().expect("pushed above");
        *last = last.max(db(-row.f));
    }
    for k in 1..history_db.len() {
        history_db[k] = history_db[k].max(history_db[k - 1]);
    }
    let full = -dense_objective(&b, &spec, &Word::ones(b.n_opt()))?;
    let enabled = word_mask(&b, &r.best.word);
    Ok(ArrayResult {
        spacing,
        n_dipoles: 3,
        segments: segments | 1,
        feed: b.fixed_indices()[0],
        enabled,
        best_word: r.best.word.to_string(),
        gain_db: db(-r.best.f),
        full_array_db: db(full),
        bound_db: realized_gain_bound(&b, 0, z0(), 0).ok().map(|g| db(g.value)),
        history_db,
        iterations: r.iterations_run(),
        evaluations: r.counters.total(),
    })
}

fn word_mask(b: &OperatorBundle, word: &Word) -> Vec<bool> {
    let mut mask = b.fixed.clone();
    for (bit, dof) in word.bits().iter().zip(b.controllable_indices()) {
        mask[dof] = *bit;
    }
    mask
}

#[derive(Debug, Serialize)]
pub struct SensitivityResult {
    pub gain_db: f64,
    /// Per DOF: realized gain in dB after toggling it; `null` for the feed.
    pub toggled_db: Vec<Option<f64>>,
    pub enabled: Vec<bool>,
}

/// Topology sensitivity of a word on the 3-dipole array.
pub fn sensitivity(spacing: f64, segments: usize, word: &str) -> Result<SensitivityResult> {
    let b = array(3, spacing, segments)?;
    let word: Word = word.trim().parse()?;
    let spec = ObjectiveSpec::realized_gain(0, z0());
    let eval = Evaluator::new(&b, &spec)?;
    let mut state = init_state(&eval, &word, 64)?;
    let gain_db = db(-state.f_val());
    let mut toggled_db = vec![None; b.n_dof()];
    for row in sensitivity_map(&mut state) {
        toggled_db[row.dof_index] = Some(db(-row.f_candidate));
    }
    Ok(SensitivityResult { gain_db, toggled_db, enabled: word_mask(&b, &word) })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    let value = r.map_err(|e| JsValue::from_str(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = impedanceSweep)]
pub fn impedance_sweep_js(l_min: f64, l_max: f64, samples: usize, segments: usize) -> std::result::Result<String, JsValue> {
    to_js(impedance_sweep(l_min, l_max, samples, segments))
}

#[wasm_bindgen(js_name = optimizeArray)]
pub fn optimize_js(spacing: f64, segments: usize, seed: u64, agents: usize, iterations: usize) -> std::result::Result<String, JsValue> {
    to_js(optimize(spacing, segments, seed, agents, iterations))
}

#[wasm_bindgen(js_name = sensitivityMap)]
pub fn sensitivity_js(spacing: f64, segments: usize, word: &str) -> std::result::Result<String, JsValue> {
    to_js(sensitivity(spacing, segments, word))
}
