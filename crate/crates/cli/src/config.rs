//! Flat `key = value` config files.
//!
//! Entries become `--key=value` arguments placed right after the
//! subcommand, so anything given on the command line (which comes later
//! and overrides) wins. The subcommand, when given, must come first.
//! `key = true` becomes a bare `--key` and `key = false` is dropped. Lines
//! starting with `#` are comments. A `command` key names the subcommand
//! when the command line does not.

use anyhow::{bail, Context, Result};

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key = value, got {line:?}", i + 1);
        };
        let k = k.trim().replace('_', "-");
        if k.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

/// Expands `--config <path>` (or `--config=<path>`) in `args`, where
/// `args[0]` is the program name.
pub fn expand(args: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().context("--config needs a path")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let entries = parse(&text).with_context(|| format!("in config {path}"))?;
    let mut command = None;
    let mut tokens = Vec::new();
    for (k, v) in entries {
        match (k.as_str(), v.as_str()) {
            ("command", _) => command = Some(v),
            (_, "true") => tokens.push(format!("--{k}")),
            (_, "false") => {}
            _ => tokens.push(format!("--{k}={v}")),
        }
    }
    // A subcommand given on the command line comes first.
    let given = rest.get(1).is_some_and(|a| !a.starts_with('-'));
    let at = match (given, command) {
        (true, _) => 2,
        (false, Some(c)) => {
            rest.insert(1, c);
            2
        }
        (false, None) => bail!("config {path} has no command and none was given"),
    };
    rest.splice(at..at, tokens);
    Ok(rest)
}
