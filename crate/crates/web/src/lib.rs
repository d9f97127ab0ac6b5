//! Browser bindings for the demo page in `www/`. Every export returns a JSON string.

pub mod demo;

use serde::Serialize;
use wasm_bindgen::prelude::*;

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

/// `|a|`, `|b|`, `|r|` and the boundary traces over the k-grid.
#[wasm_bindgen]
pub fn forward_curves(family: &str, param: f64, k_max: f64, n_k: usize) -> Result<String, JsValue> {
    to_js(demo::forward_curves(family, param, k_max, n_k))
}

/// Synthesizes data, inverts them, and returns truth and reconstruction side by side.
#[wasm_bindgen]
pub fn reconstruct(family: &str, param: f64, k_max: f64, n_k: usize) -> Result<String, JsValue> {
    to_js(demo::reconstruct(family, param, k_max, n_k))
}

#[wasm_bindgen]
pub fn diagnose(family: &str, param: f64, k_max: f64, n_k: usize) -> Result<String, JsValue> {
    to_js(demo::diagnose(family, param, k_max, n_k))
}
