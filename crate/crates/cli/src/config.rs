//! `--config FILE` support. The file is a JSON object whose keys are the
//! subcommand's flag names; its entries are spliced into the argument list
//! ahead of the user's own flags, which therefore win.

use std::ffi::OsString;

use anyhow::{bail, Context, Result};
use serde_json::Value;

const GLOBAL_WITH_VALUE: [&str; 2] = ["--jobs", "--config"];

fn config_args(obj: &serde_json::Map<String, Value>) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (key, value) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::String(s) => {
                out.push(flag.into());
                out.push(s.into());
            }
            Value::Number(n) => {
                out.push(flag.into());
                out.push(n.to_string().into());
            }
            Value::Array(items) => {
                out.push(flag.into());
                for item in items {
                    match item {
                        Value::String(s) => out.push(s.into()),
                        other => out.push(other.to_string().into()),
                    }
                }
            }
            Value::Object(_) => bail!("config key `{key}` holds an object"),
        }
    }
    Ok(out)
}

/// Returns `argv` with the config file's flags inserted after the
/// subcommand path.
pub fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = argv.into_iter();
    let mut out: Vec<OsString> = rest.next().into_iter().collect();
    let mut config: Option<String> = None;
    let mut tail: Vec<OsString> = Vec::new();
    let mut in_path = true;
    let mut pending_value = false;
    let mut path: Vec<OsString> = Vec::new();
    let mut globals: Vec<OsString> = Vec::new();
    while let Some(arg) = rest.next() {
        let text = arg.to_string_lossy().to_string();
        if text == "--config" {
            config = Some(
                rest.next()
                    .context("--config needs a path")?
                    .to_string_lossy()
                    .to_string(),
            );
            continue;
        }
        if let Some(p) = text.strip_prefix("--config=") {
            config = Some(p.to_string());
            continue;
        }
        if in_path {
            if pending_value {
                globals.push(arg);
                pending_value = false;
                continue;
            }
            if GLOBAL_WITH_VALUE.contains(&text.as_str()) {
                globals.push(arg);
                pending_value = true;
                continue;
            }
            if text.starts_with('-') {
                in_path = false;
                tail.push(arg);
                continue;
            }
            path.push(arg);
            continue;
        }
        tail.push(arg);
    }
    out.extend(globals);
    out.extend(path);
    if let Some(file) = config {
        let text = std::fs::read_to_string(&file).with_context(|| format!("reading {file}"))?;
        let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {file}"))?;
        let Value::Object(obj) = value else {
            bail!("{file} must hold a JSON object");
        };
        out.extend(config_args(&obj)?);
    }
    out.extend(tail);
    Ok(out)
}
