//! Flat `key = value` configuration files.
//!
//! Keys are the long flag names of a subcommand (`rf-trees = 50`). Values
//! from the file are spliced in front of the explicit command-line flags, so
//! flags given on the command line win. Boolean switches take `true` or
//! `false`.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Command};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`, got `{raw}`", i + 1);
        };
        let key = key.trim();
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.push(Entry {
            line: i + 1,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<Vec<Entry>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse(&text).with_context(|| format!("in {}", path.display()))
}

/// Locate `--config <path>` / `--config=<path>` in raw arguments.
pub fn find_config_arg(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

/// Rewrite `args` so that config entries for `subcommand` come first.
///
/// Keys that no subcommand understands are an error; keys that belong only
/// to other subcommands are ignored, so one file can serve a whole pipeline.
pub fn merge(cmd: &Command, args: Vec<OsString>, entries: &[Entry]) -> Result<Vec<OsString>> {
    let Some(pos) = args
        .iter()
        .skip(1)
        .position(|a| cmd.find_subcommand(a).is_some())
        .map(|p| p + 1)
    else {
        return Ok(args);
    };
    let sub = cmd.find_subcommand(&args[pos]).expect("found above");
    let known: BTreeSet<String> = cmd
        .get_subcommands()
        .flat_map(|s| s.get_arguments().filter_map(|a| a.get_long().map(str::to_string)))
        .collect();
    let mut injected: Vec<OsString> = Vec::new();
    for e in entries {
        if e.key == "config" || !known.contains(&e.key) {
            bail!("config line {}: unknown key `{}`", e.line, e.key);
        }
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(e.key.as_str())) else {
            continue;
        };
        match arg.get_action() {
            ArgAction::SetTrue => match e.value.as_str() {
                "true" => injected.push(format!("--{}", e.key).into()),
                "false" => {}
                v => bail!("config line {}: `{}` expects true or false, got `{v}`", e.line, e.key),
            },
            _ => injected.push(format!("--{}={}", e.key, e.value).into()),
        }
    }
    let mut out: Vec<OsString> = args[..=pos].to_vec();
    out.extend(injected);
    out.extend(args[pos + 1..].iter().cloned());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blanks() {
        let e = parse("# header\n\nseed = 7  # inline\njobs=2\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].key, "seed");
        assert_eq!(e[0].value, "7");
        assert_eq!(e[1].line, 4);
        assert!(parse("no equals sign").is_err());
    }

    #[test]
    fn finds_config_flag() {
        let args: Vec<OsString> = ["x", "run", "--config", "a.cfg"].iter().map(Into::into).collect();
        assert_eq!(find_config_arg(&args), Some("a.cfg".into()));
        let args: Vec<OsString> = ["x", "run", "--config=b.cfg"].iter().map(Into::into).collect();
        assert_eq!(find_config_arg(&args), Some("b.cfg".into()));
    }
}
