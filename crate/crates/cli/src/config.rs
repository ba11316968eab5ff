//! JSON config files. Top-level keys set global flags; an object under a
//! verb name sets that verb's flags:
//!
//! ```json
//! { "seed": 3, "mask": { "method": "nullavg", "filter": "8x8" } }
//! ```
//!
//! Keys are flag names (`snr_db` and `snr-db` are equivalent). Config values
//! are spliced in ahead of the user's own flags, so the command line wins.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use serde_json::{Map, Value};

use crate::error::CliError;

const VERBS: [&str; 5] = ["acquire", "mask", "recon", "eval", "compare"];
const GLOBALS_WITH_VALUE: [&str; 4] = ["--seed", "--threads", "--manifest-dir", "--config"];

/// Rewrites `argv` so that values from `--config` precede the explicit
/// flags. Returns `argv` unchanged when no config is given.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let Some(path) = config_path(&args) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Io(format!("config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let Value::Object(root) = value else {
        return Err(CliError::Usage("config must be a JSON object".into()));
    };
    let Some(verb_pos) = verb_position(&args) else {
        return Ok(argv);
    };
    let verb = args[verb_pos].clone();

    let mut out: Vec<String> = vec![args[0].clone(), verb.clone()];
    for (key, v) in &root {
        if VERBS.contains(&key.as_str()) || key == "config" {
            continue;
        }
        push_flag(&mut out, key, v)?;
    }
    if let Some(section) = root.get(&verb) {
        let Value::Object(section) = section else {
            return Err(CliError::Usage(format!("config section '{verb}' must be an object")));
        };
        push_section(&mut out, section)?;
    }
    out.extend(args[1..verb_pos].iter().cloned());
    out.extend(args[verb_pos + 1..].iter().cloned());
    Ok(out.into_iter().map(OsString::from).collect())
}

fn config_path(args: &[String]) -> Option<PathBuf> {
    let mut found = None;
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            found = it.next().map(PathBuf::from);
        } else if let Some(p) = a.strip_prefix("--config=") {
            found = Some(PathBuf::from(p));
        }
    }
    found
}

fn verb_position(args: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = &args[i];
        if GLOBALS_WITH_VALUE.contains(&a.as_str()) {
            i += 2;
            continue;
        }
        if !a.starts_with('-') {
            return VERBS.contains(&a.as_str()).then_some(i);
        }
        i += 1;
    }
    None
}

fn push_section(out: &mut Vec<String>, section: &Map<String, Value>) -> Result<(), CliError> {
    for (key, v) in section {
        push_flag(out, key, v)?;
    }
    Ok(())
}

fn push_flag(out: &mut Vec<String>, key: &str, v: &Value) -> Result<(), CliError> {
    let flag = format!("--{}", key.replace('_', "-"));
    match v {
        Value::Bool(true) => out.push(flag),
        Value::Bool(false) | Value::Null => {}
        Value::Number(n) => out.extend([flag, n.to_string()]),
        Value::String(s) => out.extend([flag, s.clone()]),
        Value::Array(items) => {
            let parts = items
                .iter()
                .map(|i| match i {
                    Value::Number(n) => Ok(n.to_string()),
                    Value::String(s) => Ok(s.clone()),
                    _ => Err(CliError::Usage(format!("config '{key}': arrays hold numbers or strings"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.extend([flag, parts.join(",")]);
        }
        Value::Object(_) => {
            return Err(CliError::Usage(format!("config '{key}': nested objects are only allowed per verb")))
        }
    }
    Ok(())
}
