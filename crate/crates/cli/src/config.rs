//! Flat `key = value` run configuration files.
//!
//! Keys are the long flag names of the subcommand (dashes or underscores).
//! Values are spliced into the argument list ahead of the real command-line
//! arguments, so flags given on the command line win.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::{ArgAction, Command};
use fds_core::{Error, Result};

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(k) => &raw[..k],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = key.trim().replace('-', "_");
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("config line {}: empty key", i + 1)));
        }
        if out.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!("config line {}: duplicate key `{key}`", i + 1)));
        }
        out.push((key, value));
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Translate config entries into flags understood by `cmd`.
pub fn entries_to_args(cmd: &Command, entries: &[(String, String)]) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (key, value) in entries {
        let arg = cmd
            .get_arguments()
            .find(|a| a.get_id().as_str() == key && a.get_long().is_some() && key != "config")
            .ok_or_else(|| Error::Config(format!("unknown config key `{key}` for `{}`", cmd.get_name())))?;
        let long = format!("--{}", arg.get_long().unwrap_or_default());
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "yes" | "1" => out.push(long.into()),
                "false" | "no" | "0" => {}
                _ => return Err(Error::Config(format!("config key `{key}` expects true or false, got `{value}`"))),
            },
            _ => {
                out.push(long.into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}
