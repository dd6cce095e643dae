//! `key = value` config files.
//!
//! Keys are the long flag names of the chosen subcommand (`-` or `_`
//! separated). File entries are spliced into the argument list right after
//! the subcommand, skipping any flag the command line already sets, so
//! command-line flags always win.

use std::ffi::OsString;
use std::path::Path;

use clap::{ArgAction, Command};

use crate::error::CliError;

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::usage(format!("config line {}: expected `key = value`, got {raw:?}", i + 1)));
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::usage(format!("config line {}: empty key", i + 1)));
        }
        if out.iter().any(|(k, _)| *k == key) {
            return Err(CliError::usage(format!("config line {}: {key} set twice", i + 1)));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

fn sets_flag(args: &[OsString], long: &str) -> bool {
    let flag = format!("--{long}");
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.strip_prefix(&flag).is_some_and(|r| r.starts_with('='))
    })
}

/// Returns `args` with the config file's entries inserted after the
/// subcommand name.
pub fn merge_config(cli: &Command, args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let Some((pos, sub)) = args
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(i, a)| cli.find_subcommand(a).map(|s| (i, s)))
    else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let user = &args[pos + 1..];
    let mut extra = Vec::new();
    for (key, value) in parse_config(&text)? {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && a.get_id() != "config")
            .ok_or_else(|| CliError::usage(format!("config key {key} is not a flag of {}", sub.get_name())))?;
        if sets_flag(user, &key) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" => extra.push(OsString::from(format!("--{key}"))),
                "false" => {}
                other => return Err(CliError::usage(format!("config key {key}: expected true or false, got {other:?}"))),
            },
            _ => extra.push(OsString::from(format!("--{key}={value}"))),
        }
    }
    let mut merged = args[..=pos].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(user);
    Ok(merged)
}
