//! Flat `key = value` config files, turned into flags that are placed in
//! front of the command-line flags so that the latter win.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use crate::CliError;

const SUBCOMMANDS: [&str; 4] = ["verify", "run", "perfmodel", "bench"];

/// Parse a config file into `--key=value` flags.
pub fn flags_from_file(path: &Path) -> Result<Vec<OsString>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn parse(text: &str) -> Result<Vec<OsString>, String> {
    let mut flags = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        if key.is_empty() || key.starts_with('-') {
            return Err(format!("line {}: bad key `{key}`", n + 1));
        }
        if key == "config" {
            return Err(format!(
                "line {}: config files cannot include others",
                n + 1
            ));
        }
        match value {
            "true" => flags.push(format!("--{key}").into()),
            "false" if key == "overlap" => flags.push("--no-overlap".into()),
            "false" => {}
            _ => flags.push(format!("--{key}={value}").into()),
        }
    }
    Ok(flags)
}

/// Find `--config FILE` among the arguments and splice the file's flags in
/// right after the subcommand name.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut path = None;
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            path = iter.next().cloned();
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let flags = flags_from_file(Path::new(&path))?;
    let at = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
        .map_or(args.len(), |i| i + 1);
    let mut out = args;
    out.splice(at..at, flags);
    Ok(out)
}
