//! Optional JSON config file whose keys mirror the long flag names.
//!
//! Resolution order for every option: explicit flag, then config file
//! value, then built-in default. The fully resolved configuration is echoed
//! to stdout and written next to the other outputs so a run can be
//! reproduced from its artifacts alone.

use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::CliError;

/// Parsed config file contents (empty when no file was given).
pub struct FileConfig {
    values: Map<String, Value>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self { values: Map::new() });
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::stage("config", format!("{}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::stage("config", format!("{}: {e}", path.display())))?;
        match value {
            Value::Object(values) => Ok(Self { values }),
            other => Err(CliError::stage(
                "config",
                format!("{}: expected a JSON object, got {other}", path.display()),
            )),
        }
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    fn type_err(key: &str, expected: &str, got: &Value) -> CliError {
        CliError::stage(
            "config",
            format!("key {key:?}: expected {expected}, got {got}"),
        )
    }

    pub fn u64_value(&self, key: &str) -> Result<Option<u64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| Self::type_err(key, "an unsigned integer", v)),
        }
    }

    pub fn usize_value(&self, key: &str) -> Result<Option<usize>, CliError> {
        Ok(self.u64_value(key)?.map(|v| v as usize))
    }

    pub fn f64_value(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| Self::type_err(key, "a number", v)),
        }
    }

    pub fn string_value(&self, key: &str) -> Result<Option<String>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(|s| Some(s.to_string()))
                .ok_or_else(|| Self::type_err(key, "a string", v)),
        }
    }

    pub fn path_value(&self, key: &str) -> Result<Option<PathBuf>, CliError> {
        Ok(self.string_value(key)?.map(PathBuf::from))
    }
}

/// Fails with a usage error when a required option is absent from both the
/// command line and the config file.
pub fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required (flag or config file)")))
}
