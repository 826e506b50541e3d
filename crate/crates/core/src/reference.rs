//! Bundled empirical F1 grids (hops 1-4 by six context lengths per method)
//! for offline fitting, plus the default benchmark content.

use crate::fitting::{self, MethodObservations};

pub const QWEN3_14B_F1_CSV: &str = include_str!("../data/qwen3_14b_f1.csv");
pub const QWEN3_8B_F1_CSV: &str = include_str!("../data/qwen3_8b_f1.csv");

pub const ENTITIES_JSON: &str = include_str!("../data/entities.json");
pub const TEMPLATES_JSON: &str = include_str!("../data/templates.json");
pub const NOISE_TXT: &str = include_str!("../data/noise.txt");
pub const PROMPTS_TOML: &str = include_str!("../data/prompts.toml");

/// Looks up a bundled grid by name (`qwen3-14b` or `qwen3-8b`).
pub fn f1_grid(name: &str) -> Option<&'static str> {
    match name.to_ascii_lowercase().as_str() {
        "qwen3-14b" | "qwen3_14b" | "14b" => Some(QWEN3_14B_F1_CSV),
        "qwen3-8b" | "qwen3_8b" | "8b" => Some(QWEN3_8B_F1_CSV),
        _ => None,
    }
}

pub fn observations(name: &str) -> Option<MethodObservations> {
    f1_grid(name).map(|csv| fitting::read_observations_csv(csv.as_bytes()).expect("bundled CSV is valid"))
}
