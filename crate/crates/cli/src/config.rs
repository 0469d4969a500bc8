//! Flag + config-file resolution. Every command has a serde struct holding
//! its fully resolved settings; values come from struct defaults, then the
//! optional `--config` JSON object, then explicitly given flags.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

/// Merges `flags` (a serialized clap struct) over the config file and
/// deserializes the result. Null fields and empty lists count as "not given".
pub fn resolve<T: DeserializeOwned>(config: Option<&Path>, flags: &impl Serialize) -> Result<T, CliError> {
    let mut merged = match config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            match serde_json::from_str(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(CliError::Usage(format!("config {} must hold a JSON object", path.display()))),
                Err(e) => return Err(CliError::Usage(format!("config {}: {e}", path.display()))),
            }
        }
        None => Map::new(),
    };
    let Value::Object(given) = serde_json::to_value(flags).expect("flag structs serialize") else {
        unreachable!("flag structs serialize to objects")
    };
    for (k, v) in given {
        let absent = v.is_null() || v.as_array().is_some_and(|a| a.is_empty());
        if !absent {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("invalid settings: {e}")))
}

/// Writes the resolved settings next to the command's outputs.
pub fn echo(dir: &Path, resolved: &impl Serialize) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(e.into()))?;
    let text = serde_json::to_string_pretty(resolved).expect("resolved configs serialize");
    fs::write(dir.join("config.json"), text + "\n").map_err(|e| CliError::Runtime(e.into()))
}
