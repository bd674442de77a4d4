//! Browser bindings for a few pure operations of the harness. Each export
//! wraps a plain function so the logic is testable off the browser.

use guiagent_core::actions::{parse_grounded, Platform};
use guiagent_core::mixture::{lr_schedule, LrKind};
use wasm_bindgen::prelude::*;

/// Parses a grounded action; returns `{canonical, action}` as JSON.
pub fn parse_action_json(text: &str, platform: &str) -> Result<String, String> {
    let platform: Platform = platform.parse()?;
    let a = parse_grounded(text, platform).map_err(|e| e.to_string())?;
    let out = serde_json::json!({ "canonical": a.serialize(), "action": a });
    Ok(out.to_string())
}

/// Learning rate at `points` evenly spaced steps of a warmup + cosine run.
pub fn lr_points(total_steps: u32, base_lr: f64, warmup_ratio: f64, points: u32) -> Vec<f64> {
    let total = u64::from(total_steps.max(1));
    let s = lr_schedule(total, base_lr, warmup_ratio, LrKind::Cosine);
    let n = u64::from(points.max(2));
    (0..n).map(|i| s.lr(i * total / (n - 1))).collect()
}

/// 1 where a GUI sample sits in the interleaved segment, else 0.
pub fn pattern(mid: u32, gui: u32) -> Vec<u8> {
    guiagent_core::mixture::interleave_pattern(mid as usize, gui as usize)
        .into_iter()
        .map(u8::from)
        .collect()
}

#[wasm_bindgen]
pub fn parse_action(text: &str, platform: &str) -> Result<String, JsError> {
    parse_action_json(text, platform).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn lr_curve(total_steps: u32, base_lr: f64, warmup_ratio: f64, points: u32) -> Vec<f64> {
    lr_points(total_steps, base_lr, warmup_ratio, points)
}

#[wasm_bindgen]
pub fn interleave_pattern(mid: u32, gui: u32) -> Vec<u8> {
    pattern(mid, gui)
}
