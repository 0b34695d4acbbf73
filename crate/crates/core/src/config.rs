//! Sectioned TOML configuration with `key=value` overrides.
//!
//! A configuration file must list every key of every section; the set of
//! valid keys is the one produced by serializing [`ExperimentConfig`].

use std::path::Path;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, Seeds};

/// Every valid `section.key`, in file order.
pub fn valid_keys() -> Vec<String> {
    let table = to_table(&ExperimentConfig::full_size()).expect("default config serializes");
    let mut keys = Vec::new();
    for (section, body) in &table {
        if let Value::Table(body) = body {
            keys.extend(body.keys().map(|k| format!("{section}.{k}")));
        }
    }
    keys
}

fn key_list() -> String {
    valid_keys().join(", ")
}

fn to_table(cfg: &ExperimentConfig) -> Result<Table> {
    Table::try_from(cfg).map_err(|e| Error::Config(e.to_string()))
}

pub fn to_toml_string(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

/// Rejects unknown sections or keys and reports the first missing key.
fn check_keys(table: &Table) -> Result<()> {
    let valid = valid_keys();
    for (section, body) in table {
        let Value::Table(body) = body else {
            return Err(Error::Config(format!(
                "unknown top-level key `{section}`; valid keys: {}",
                key_list()
            )));
        };
        for key in body.keys() {
            let full = format!("{section}.{key}");
            if !valid.contains(&full) {
                return Err(Error::Config(format!("unknown key `{full}`; valid keys: {}", key_list())));
            }
        }
    }
    for full in &valid {
        let (section, key) = full.split_once('.').expect("sectioned key");
        let present = table
            .get(section)
            .and_then(Value::as_table)
            .is_some_and(|t| t.contains_key(key));
        if !present {
            return Err(Error::Config(format!("missing key `{full}`")));
        }
    }
    Ok(())
}

/// Maps `key` or `section.key` to its full name.
pub fn resolve_key(key: &str) -> Result<String> {
    let valid = valid_keys();
    if key.contains('.') {
        if valid.iter().any(|k| k == key) {
            return Ok(key.to_string());
        }
    } else {
        let hits: Vec<&String> = valid
            .iter()
            .filter(|k| k.split_once('.').is_some_and(|(_, name)| name == key))
            .collect();
        match hits.as_slice() {
            [one] => return Ok((*one).clone()),
            [] => {}
            many => {
                let names: Vec<&str> = many.iter().map(|s| s.as_str()).collect();
                return Err(Error::Config(format!(
                    "ambiguous key `{key}`, use one of {}",
                    names.join(", ")
                )));
            }
        }
    }
    Err(Error::Config(format!("unknown key `{key}`; valid keys: {}", key_list())))
}

fn parse_value(raw: &str) -> Value {
    match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

/// Splits `key=value`, resolving the key and typing the value as TOML.
pub fn parse_override(text: &str) -> Result<(String, Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{text}` is not of the form key=value")))?;
    Ok((resolve_key(key.trim())?, parse_value(raw.trim())))
}

fn apply_overrides(table: &mut Table, overrides: &[String]) -> Result<()> {
    for text in overrides {
        let (full, value) = parse_override(text)?;
        let (section, key) = full.split_once('.').expect("sectioned key");
        table
            .get_mut(section)
            .and_then(Value::as_table_mut)
            .expect("checked section")
            .insert(key.to_string(), value);
    }
    Ok(())
}

fn from_table(table: Table) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let table: Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    check_keys(&table)?;
    from_table(table)
}

/// Resolves the effective configuration: the file (or the built-in default
/// or small profile), then `seed`, then each override in order.
pub fn load_config(path: Option<&Path>, small: bool, seed: Option<u64>, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            let t: Table = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            check_keys(&t)?;
            t
        }
        None if small => to_table(&ExperimentConfig::small())?,
        None => to_table(&ExperimentConfig::full_size())?,
    };
    if let Some(seed) = seed {
        let seeds = Table::try_from(Seeds::from_base(seed)).map_err(|e| Error::Config(e.to_string()))?;
        table.insert("seeds".into(), Value::Table(seeds));
    }
    apply_overrides(&mut table, overrides)?;
    from_table(table)
}
