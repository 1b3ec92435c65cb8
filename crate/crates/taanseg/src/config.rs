//! Pipeline configuration from JSON with `section.field=value` overrides.

use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use taanseg_core::config::PipelineConfig;

use crate::error::{IoError, Result};

/// Environment variable naming a default config file.
pub const CONFIG_ENV: &str = "TAANSEG_CONFIG";

/// Applies one `a.b.c=value` override. The value is parsed as JSON, falling
/// back to a plain string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| IoError::Config(format!("override {spec:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(IoError::Config(format!("override key {key:?} is malformed")));
    }
    for part in &parts[..parts.len() - 1] {
        if !node.is_object() {
            return Err(IoError::Config(format!("override {key:?} descends into a non-object")));
        }
        node = node
            .as_object_mut()
            .expect("checked above")
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    match node.as_object_mut() {
        Some(obj) => {
            obj.insert(parts[parts.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(IoError::Config(format!("override {key:?} descends into a non-object"))),
    }
}

/// Defaults, overlaid by the file (if any), overlaid by overrides; unknown
/// keys and out-of-range values are rejected.
pub fn build_config(file: Option<&Path>, overrides: &[String]) -> Result<PipelineConfig> {
    let mut root = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| IoError::io(p, e))?;
            serde_json::from_str::<Value>(&text).map_err(|e| IoError::parse(p, e.line(), e.to_string()))?
        }
        None => Value::Object(Map::new()),
    };
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    let cfg: PipelineConfig = serde_json::from_value(root).map_err(|e| IoError::Config(e.to_string()))?;
    cfg.validate().map_err(|e| IoError::Config(e.to_string()))?;
    Ok(cfg)
}

/// The explicit path wins over the environment variable.
pub fn config_path(explicit: Option<PathBuf>) -> Option<PathBuf> {
    explicit.or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from))
}
