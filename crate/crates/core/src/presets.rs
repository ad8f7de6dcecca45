//! Configurations shipped with the crate.

use crate::error::ConfigError;
use crate::model::{parse_config_str, Scenario};

pub const DEFAULT: &str = include_str!("../../../configs/default.toml");
/// Arrival peak doubled to 8 kbits.
pub const FIG4_AMAX8: &str = include_str!("../../../configs/fig4_amax8.toml");
/// Device count doubled to 10.
pub const FIG4_N10: &str = include_str!("../../../configs/fig4_n10.toml");

pub const NAMES: [&str; 3] = ["default", "fig4_amax8", "fig4_n10"];

pub fn text(name: &str) -> Option<&'static str> {
    match name {
        "default" => Some(DEFAULT),
        "fig4_amax8" => Some(FIG4_AMAX8),
        "fig4_n10" => Some(FIG4_N10),
        _ => None,
    }
}

pub fn load(name: &str) -> Result<Scenario, ConfigError> {
    let text = text(name).ok_or_else(|| ConfigError::Invalid {
        field: "preset".into(),
        reason: format!("unknown preset `{name}`; known: {}", NAMES.join(", ")),
    })?;
    parse_config_str(text)
}

pub fn default_scenario() -> Scenario {
    load("default").expect("shipped default config is valid")
}
