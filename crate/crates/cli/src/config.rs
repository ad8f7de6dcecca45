//! Config loading for the CLI: preset or file, `key=value` overrides, and an
//! optional `policy` key that the core schema does not know about.

use std::path::Path;

use mec_lyapunov::{parse_config_str, presets, ConfigError, PolicyKind, Scenario};
use toml::{Table, Value};

const DEVICE_KEYS: [&str; 7] = [
    "count",
    "distance_m",
    "L_cycles_per_bit",
    "f_max_GHz",
    "p_max_mW",
    "A_max_kbits",
    "fading_mean",
];

const INTEGER_KEYS: [&str; 4] = ["seed", "T_slots", "burn_in", "count"];

fn canonical_key(key: &str) -> &str {
    match key {
        "V" => "V_bits2_per_W",
        "T" => "T_slots",
        "N" => "count",
        "A_max" => "A_max_kbits",
        other => other,
    }
}

/// A scenario plus the policy named in its document, if any.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub policy: Option<PolicyKind>,
}

/// Reads `source` as a file path if one exists, otherwise as a preset name.
pub fn read_source(source: &str) -> Result<String, ConfigError> {
    let path = Path::new(source);
    if path.is_file() {
        return std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{source}: {e}")));
    }
    presets::text(source).map(str::to_owned).ok_or_else(|| {
        ConfigError::Io(format!(
            "`{source}` is neither a readable file nor a preset ({})",
            presets::NAMES.join(", ")
        ))
    })
}

fn parse_value(key: &str, raw: &str) -> Result<Value, ConfigError> {
    let doc: Table = format!("v = {raw}")
        .parse()
        .or_else(|_| format!("v = \"{raw}\"").parse())
        .map_err(|e: toml::de::Error| ConfigError::Invalid {
            field: key.into(),
            reason: e.message().to_owned(),
        })?;
    let value = doc["v"].clone();
    Ok(match value {
        Value::Integer(i) if !INTEGER_KEYS.contains(&key) => Value::Float(i as f64),
        Value::Float(f) if INTEGER_KEYS.contains(&key) && f.fract() == 0.0 && f >= 0.0 => {
            Value::Integer(f as i64)
        }
        v => v,
    })
}

/// Applies `key=value` pairs. Device keys apply to every device block.
pub fn apply_overrides(doc: &mut Table, overrides: &[String]) -> Result<(), ConfigError> {
    for item in overrides {
        let (key, raw) = item.split_once('=').ok_or_else(|| ConfigError::Invalid {
            field: item.clone(),
            reason: "override must look like key=value".into(),
        })?;
        let key = canonical_key(key.trim());
        let value = parse_value(key, raw.trim())?;
        if DEVICE_KEYS.contains(&key) {
            let blocks = doc
                .get_mut("devices")
                .and_then(Value::as_array_mut)
                .ok_or_else(|| ConfigError::MissingKey("devices".into()))?;
            for block in blocks.iter_mut() {
                if let Some(t) = block.as_table_mut() {
                    t.insert(key.to_owned(), value.clone());
                }
            }
        } else {
            doc.insert(key.to_owned(), value);
        }
    }
    Ok(())
}

/// Loads a config, applies overrides, and splits off the `policy` key.
pub fn load(source: &str, overrides: &[String]) -> Result<Loaded, ConfigError> {
    let text = read_source(source)?;
    let mut doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_owned()))?;
    apply_overrides(&mut doc, overrides)?;
    let policy = match doc.remove("policy") {
        None => None,
        Some(Value::String(name)) => Some(name.parse()?),
        Some(other) => {
            return Err(ConfigError::Invalid {
                field: "policy".into(),
                reason: format!("expected a policy name, got {other}"),
            })
        }
    };
    let rendered = toml::to_string(&doc).map_err(|e| ConfigError::Parse(e.to_string()))?;
    Ok(Loaded {
        scenario: parse_config_str(&rendered)?,
        policy,
    })
}

/// Canonical config text that reproduces a run when fed back to `--config`.
pub fn echo(scenario: &Scenario, policy: Option<PolicyKind>) -> String {
    let mut s = format!(
        "# config_hash = {}, seed = {}\n",
        scenario.config_hash(),
        scenario.system.rng_seed
    );
    if let Some(p) = policy {
        s.push_str(&format!("policy = \"{p}\"\n"));
    }
    s.push_str(&scenario.to_toml());
    s
}
