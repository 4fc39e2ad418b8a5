//! `--config <file>`: `key=value` lines turned into flags. Flags given on the
//! command line win.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::PathBuf;

use crate::error::{CliError, CliResult};

/// Flags that take no value; `key=true` enables them.
const SWITCHES: &[&str] = &["allow-off-grid", "weighted"];

fn config_path(args: &[String]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

pub fn parse_config(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", i + 1)))?;
        let k = k.trim().trim_start_matches("--");
        if k == "config" {
            return Err(CliError::Usage("config files cannot include other config files".into()));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Splices config entries into `args` right after the subcommand.
pub fn expand(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let strings: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let Some(path) = config_path(&strings) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let given: BTreeSet<String> = strings
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let mut injected = Vec::new();
    for (k, v) in parse_config(&text)? {
        if given.contains(&k) {
            continue;
        }
        if SWITCHES.contains(&k.as_str()) {
            match v.as_str() {
                "true" => injected.push(format!("--{k}")),
                "false" => {}
                _ => return Err(CliError::Usage(format!("config key `{k}` expects true or false"))),
            }
        } else {
            injected.push(format!("--{k}"));
            injected.push(v);
        }
    }
    let at = args.len().min(2);
    let mut out = args;
    out.splice(at..at, injected.into_iter().map(OsString::from));
    Ok(out)
}
