use toml::{Table, Value};

use crate::error::ConfigError;
use crate::sim::SimConfig;

/// Splits `key=value`. The value is read as a TOML literal, falling back to
/// a bare string (`pipeline=wta`).
pub fn parse_override(raw: &str) -> Result<(String, Value), ConfigError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| ConfigError::single(format!("override `{raw}`: expected key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::single(format!("override `{raw}`: empty key")));
    }
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    Ok((key.to_string(), parsed))
}

/// Sets dotted `key` in `table`, creating intermediate tables.
pub fn apply_override(table: &mut Table, key: &str, value: Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut cur = table;
    for part in parts {
        let entry = cur.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::single(format!("override `{key}`: `{part}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parses a TOML simulator config, applies `key=value` overrides, and
/// validates the result. Missing fields take their defaults.
pub fn parse_sim_config(text: &str, overrides: &[String]) -> Result<SimConfig, ConfigError> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::single(e.to_string()))?;
    for raw in overrides {
        let (key, value) = parse_override(raw)?;
        apply_override(&mut table, &key, value)?;
    }
    let config: SimConfig =
        Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::single(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// [`parse_sim_config`] on a file.
pub fn load_sim_config(path: &std::path::Path, overrides: &[String]) -> Result<SimConfig, crate::error::IoError> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_sim_config(&text, overrides)?)
}
