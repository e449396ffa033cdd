//! Flat `key = value` config files.
//!
//! Each key is the long name of a flag of the chosen subcommand (or a global
//! flag). Options the command line does not already set are spliced in
//! right after the subcommand name.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Command, CommandFactory};

use crate::Cli;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Path given to `--config`, if any.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut iter = args.iter().skip(1);
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return iter.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Index of the subcommand name in `args`.
fn subcommand_index(args: &[OsString], cmd: &Command) -> Option<usize> {
    let mut skip_value = false;
    for (i, a) in args.iter().enumerate().skip(1) {
        let s = a.to_string_lossy();
        if skip_value {
            skip_value = false;
            continue;
        }
        if s == "--threads" || s == "--config" {
            skip_value = true;
            continue;
        }
        if cmd.find_subcommand(s.as_ref()).is_some() {
            return Some(i);
        }
    }
    None
}

fn parse_lines(path: &Path, text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError(format!(
                "{}:{}: expected `key = value`",
                path.display(),
                n + 1
            )));
        };
        let value = value.trim();
        let value = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
            .unwrap_or(value);
        out.push((key.trim().replace('_', "-"), value.to_owned()));
    }
    Ok(out)
}

/// Splice the options of the `--config` file, if one is named, into `args`.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text =
        fs::read_to_string(&path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let entries = parse_lines(&path, &text)?;

    let root = Cli::command();
    let Some(at) = subcommand_index(&args, &root) else {
        // no subcommand: let clap report the usage error
        return Ok(args);
    };
    let sub_name = args[at].to_string_lossy().into_owned();
    let sub = root
        .find_subcommand(&sub_name)
        .expect("index points at a subcommand");

    let given = |key: &str| {
        let flag = format!("--{key}");
        args.iter().skip(1).any(|a| {
            let a = a.to_string_lossy();
            a == flag || a.starts_with(&format!("{flag}="))
        })
    };

    let mut injected = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            continue;
        }
        let arg = sub
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| {
                ConfigError(format!(
                    "{}: `{key}` is not an option of `{sub_name}`",
                    path.display()
                ))
            })?;
        if given(&key) {
            continue;
        }
        if arg.get_action().takes_values() {
            injected.push(OsString::from(format!("--{key}")));
            injected.push(OsString::from(value));
        } else {
            match value.as_str() {
                "true" | "yes" | "1" => injected.push(OsString::from(format!("--{key}"))),
                "false" | "no" | "0" => {}
                _ => {
                    return Err(ConfigError(format!(
                        "{}: `{key}` is a switch and takes true or false, got `{value}`",
                        path.display()
                    )))
                }
            }
        }
    }

    let mut out = args[..=at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[at + 1..]);
    Ok(out)
}

/// The config file named on the command line, for provenance records.
pub fn named_file(args: &[OsString]) -> Option<PathBuf> {
    config_path(args)
}
