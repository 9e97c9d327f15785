//! `--config FILE` support: a flat JSON object whose keys mirror long flags.
//!
//! Keys are appended to argv as `--key value` unless the flag is already
//! present, so explicit flags always win over the file.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::Value;

use crate::BadConfig;

fn find_config(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = a.to_str().and_then(|s| s.strip_prefix("--config=")) {
            return Some(rest.into());
        }
    }
    None
}

fn has_flag(argv: &[OsString], flag: &str) -> bool {
    let eq = format!("{flag}=");
    argv.iter().any(|a| a == flag || a.to_str().is_some_and(|s| s.starts_with(&eq)))
}

fn scalar(key: &str, v: &Value) -> Result<String> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        _ => bail!(BadConfig(format!("config key {key}: unsupported value {v}"))),
    })
}

/// Merge the config file named by `--config` (if any) into `argv`.
pub fn merge(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = find_config(&argv) else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let obj: serde_json::Map<String, Value> = serde_json::from_str(&text)
        .map_err(|e| BadConfig(format!("config {}: {e}", path.display())))?;
    let mut out = argv;
    for (key, value) in obj {
        if key == "config" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        if has_flag(&out, &flag) {
            continue;
        }
        match &value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(flag.into()),
            Value::Array(items) => {
                let parts = items.iter().map(|v| scalar(&key, v)).collect::<Result<Vec<_>>>()?;
                out.push(flag.into());
                out.push(parts.join(",").into());
            }
            v => {
                out.push(flag.into());
                out.push(scalar(&key, v)?.into());
            }
        }
    }
    Ok(out)
}
