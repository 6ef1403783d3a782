//! Layered settings: config file, then `KIC_*` environment variables, then
//! command-line flags. Later layers win.
//!
//! The config file is flat TOML: `key = value` lines with string, number,
//! boolean or array values. Keys are the flag names with `-` written as `_`.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

pub const ENV_PREFIX: &str = "KIC_";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Merged key/value settings for one subcommand.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    known: &'static [&'static str],
    values: BTreeMap<String, String>,
}

fn scalar(key: &str, value: &toml::Value) -> Result<String, UsageError> {
    match value {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        toml::Value::Array(items) => Ok(items
            .iter()
            .map(|v| scalar(key, v))
            .collect::<Result<Vec<_>, _>>()?
            .join(",")),
        _ => Err(UsageError(format!("config key {key:?} must be a plain value"))),
    }
}

impl Settings {
    pub fn new(known: &'static [&'static str]) -> Self {
        Self { known, values: BTreeMap::new() }
    }

    /// Applies a config file's contents. Unknown keys are rejected by name.
    pub fn apply_file_text(&mut self, text: &str, source: &str) -> Result<(), UsageError> {
        let table: toml::Table =
            text.parse().map_err(|e: toml::de::Error| UsageError(format!("{source}: {}", e.message())))?;
        for (key, value) in &table {
            if !self.known.contains(&key.as_str()) {
                return Err(UsageError(format!("{source}: unknown config key {key:?}")));
            }
            self.values.insert(key.clone(), scalar(key, value)?);
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_file_text(&text, &path.display().to_string())
    }

    /// Applies `KIC_<KEY>` variables for the known keys.
    pub fn apply_env<I>(&mut self, vars: I)
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (name, value) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
            let key = rest.to_lowercase();
            if let Some(k) = self.known.iter().find(|k| **k == key) {
                self.values.insert(k.to_string(), value);
            }
        }
    }

    pub fn set_flag(&mut self, key: &str, value: Option<String>) {
        debug_assert!(self.known.contains(&key), "{key} is not a known key");
        if let Some(v) = value {
            self.values.insert(key.to_string(), v);
        }
    }

    pub fn set_flag_list(&mut self, key: &str, values: &[String]) {
        if !values.is_empty() {
            self.set_flag(key, Some(values.join(",")));
        }
    }

    pub fn set_flag_bool(&mut self, key: &str, value: bool) {
        if value {
            self.set_flag(key, Some("true".into()));
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, UsageError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| UsageError(format!("invalid value {v:?} for {key}: {e}"))))
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, UsageError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, UsageError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| UsageError(format!("missing required setting --{}", key.replace('_', "-"))))
    }

    pub fn flag(&self, key: &str) -> Result<bool, UsageError> {
        self.get_or(key, false)
    }

    pub fn list(&self, key: &str) -> Vec<String> {
        self.raw(key)
            .map(|v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
            .unwrap_or_default()
    }
}
