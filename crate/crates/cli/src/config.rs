//! JSON config files. Keys are flag names (`"points-per-shape": 2048`);
//! values given on the command line win over the file, which wins over the
//! built-in defaults.

use std::fs;
use std::path::Path;

use clap::parser::ValueSource;
use clap::ArgMatches;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub fn read_config(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Config(format!("{}: expected a JSON object", path.display()))),
        Err(e) => Err(CliError::Config(format!("{}: {e}", path.display()))),
    }
}

/// Overlays `config` onto parsed `args` wherever the flag was not given on
/// the command line. Keys that are not flags of this command are rejected.
pub fn merge<T: Serialize + DeserializeOwned>(
    args: T,
    matches: &ArgMatches,
    config: &Map<String, Value>,
) -> Result<T, CliError> {
    let Value::Object(mut obj) = serde_json::to_value(&args).expect("arguments serialize") else {
        unreachable!("argument structs serialize to objects")
    };
    for (key, value) in config {
        if !obj.contains_key(key) {
            let mut known: Vec<&str> = obj.keys().map(String::as_str).collect();
            known.sort_unstable();
            return Err(CliError::Config(format!("unknown key `{key}` (expected one of {})", known.join(", "))));
        }
        let id = key.replace('-', "_");
        if matches.value_source(&id) != Some(ValueSource::CommandLine) {
            obj.insert(key.clone(), value.clone());
        }
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| CliError::Config(e.to_string()))
}
