//! Key=value configuration files.
//!
//! Each non-blank, non-comment line is `key = value`, where `key` is the long
//! name of a flag of the chosen subcommand. File entries are appended to the
//! argument list for every flag not given on the command line, so flags win
//! over the file and the file wins over environment values and defaults.

use std::ffi::OsString;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgMatches, Command};

use crate::Failure;

/// Parses `key = value` lines. `#` starts a comment.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", k + 1))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("line {}: empty key", k + 1));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Extra arguments contributed by the config file named in `matches`.
pub fn overlay(cmd: &Command, matches: &ArgMatches, path: &Path) -> Result<Vec<OsString>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let entries =
        parse(&text).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?;
    let Some((name, sub_matches)) = matches.subcommand() else {
        return Ok(Vec::new());
    };
    let sub = cmd
        .find_subcommand(name)
        .expect("matched subcommand is defined");
    let mut extra = Vec::new();
    for (key, value) in entries {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config")
            .ok_or_else(|| Failure::Usage(format!("config key {key:?} is not a flag of {name}")))?;
        if sub_matches.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        if arg.get_action().takes_values() {
            extra.push(OsString::from(format!("--{key}={value}")));
        } else {
            match value.as_str() {
                "true" | "1" | "yes" => extra.push(OsString::from(format!("--{key}"))),
                "false" | "0" | "no" => {}
                other => {
                    return Err(Failure::Usage(format!(
                        "config key {key:?} expects true or false, got {other:?}"
                    )))
                }
            }
        }
    }
    Ok(extra)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_underscores() {
        let got = parse("# c\n sigma = 2.5 \n\nrecord_timings=true # on\n").unwrap();
        assert_eq!(
            got,
            vec![
                ("sigma".to_string(), "2.5".to_string()),
                ("record-timings".to_string(), "true".to_string())
            ]
        );
    }

    #[test]
    fn rejects_missing_equals() {
        assert!(parse("sigma 2").is_err());
    }
}
