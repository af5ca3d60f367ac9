//! WebAssembly bindings for the static demo page in `www/`. Every export
//! returns a JSON string; the plain functions behind them are usable natively.

use newsbias::anonymizer::{
    anonymize, indel_distance, token_set_indel_similarity, token_sort_indel_similarity, window_similarity, MatchConfig,
};
use newsbias::corpus::CompanyIdentity;
use newsbias::synthlab::{run_bias_lab, SynthConfig};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest world the page may request.
pub const MAX_FIRM_DAYS: u32 = 40_000;

/// Replaces `official_name` (and any comma-separated aliases) in `headline`.
pub fn anonymize_json(headline: &str, official_name: &str, aliases: &str) -> Result<Value, String> {
    let config = MatchConfig::default();
    let aliases: Vec<String> = aliases
        .split(',')
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .map(String::from)
        .collect();
    let identity =
        CompanyIdentity::new("DEMO", official_name, aliases, &config.suffix_list).map_err(|e| e.to_string())?;
    let result = anonymize(headline, &identity, &config).map_err(|e| e.to_string())?;
    let spans: Vec<Value> = result
        .spans
        .iter()
        .map(|s| json!({ "text": &headline[s.start..s.end], "kind": s.kind.as_str() }))
        .collect();
    Ok(json!({
        "cleaned_name": identity.cleaned_name,
        "acronym": identity.acronym,
        "replaced": result.replaced_text,
        "spans": spans,
    }))
}

pub fn similarity_json(window: &str, name: &str) -> Value {
    let config = MatchConfig::default();
    let score = window_similarity(window, name, &config);
    json!({
        "indel_distance": indel_distance(window, name),
        "token_sort": token_sort_indel_similarity(window, name),
        "token_set": token_set_indel_similarity(window, name),
        "window": score,
        "threshold": config.similarity_threshold,
        "replaced": score > config.similarity_threshold,
    })
}

pub fn bias_lab_json(
    seed: u32,
    n_firms: u32,
    n_days: u32,
    lookahead: f64,
    distraction: f64,
    famous: f64,
) -> Result<Value, String> {
    if n_firms.saturating_mul(n_days) > MAX_FIRM_DAYS {
        return Err(format!("world too large: at most {MAX_FIRM_DAYS} firm-days"));
    }
    let config = SynthConfig {
        n_firms: n_firms as usize,
        n_days: n_days as usize,
        seed: seed.into(),
        lookahead_strength: lookahead,
        distraction_strength: distraction,
        famous_fraction: famous,
        ..SynthConfig::default()
    };
    let r = run_bias_lab(&config, &MatchConfig::default()).map_err(|e| e.to_string())?;
    Ok(json!({
        "mean_original": r.long_short.mean_a,
        "mean_replaced": r.long_short.mean_b,
        "gap_bp": r.gap_bp,
        "t": r.long_short.t,
        "p": r.long_short.p,
        "days": r.long_short.n,
        "headlines": r.n_headlines,
        "modified_fraction": r.modified_fraction,
    }))
}

#[wasm_bindgen]
pub fn anonymize_headline(headline: &str, official_name: &str, aliases: &str) -> Result<String, JsError> {
    anonymize_json(headline, official_name, aliases)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn similarity(window: &str, name: &str) -> String {
    similarity_json(window, name).to_string()
}

#[wasm_bindgen]
pub fn bias_lab(
    seed: u32,
    n_firms: u32,
    n_days: u32,
    lookahead: f64,
    distraction: f64,
    famous: f64,
) -> Result<String, JsError> {
    bias_lab_json(seed, n_firms, n_days, lookahead, distraction, famous)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}
