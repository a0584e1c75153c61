//! `--config` files: one `key=value` per line, `#` starts a comment. Keys
//! are long flag names of the chosen subcommand (`mad_k` and `--mad-k`
//! both work). Keys the subcommand does not know are skipped, so a single
//! file can serve every stage. Flags already on the command line win.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::CommandFactory;
use gazelab_core::{Error, Result};

use crate::Cli;

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::usage(format!("config line {}: expected key=value", i + 1)))?;
        let key = k.trim().trim_start_matches('-').replace('_', "-");
        if key.is_empty() {
            return Err(Error::usage(format!("config line {}: empty key", i + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[String]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
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

fn subcommand(args: &[String]) -> Option<&str> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            it.next();
        } else if !a.starts_with('-') {
            return Some(a);
        }
    }
    None
}

fn given(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_eq = format!("--{key}=");
    args.iter().any(|a| *a == flag || a.starts_with(&with_eq))
}

/// The process arguments with config-file settings appended.
pub fn merged_args(raw: impl Iterator<Item = OsString>) -> Result<Vec<String>> {
    let mut args = Vec::new();
    for a in raw {
        args.push(
            a.into_string()
                .map_err(|a| Error::usage(format!("argument is not valid UTF-8: {a:?}")))?,
        );
    }
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let entries = parse(&text)?;
    let cmd = Cli::command();
    let Some(sub) = subcommand(&args).and_then(|s| cmd.find_subcommand(s)) else {
        // let clap report the missing or unknown subcommand
        return Ok(args);
    };
    let mut extra = Vec::new();
    for (key, value) in entries {
        if key == "config" || given(&args, &key) {
            continue;
        }
        let Some(arg) = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
        else {
            continue;
        };
        if arg.get_action().takes_values() {
            extra.push(format!("--{key}"));
            extra.extend(value.split_whitespace().map(str::to_string));
        } else {
            match value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => extra.push(format!("--{key}")),
                "false" | "no" | "0" => {}
                other => {
                    return Err(Error::usage(format!(
                        "config key '{key}' is a switch; expected true or false, got '{other}'"
                    )))
                }
            }
        }
    }
    args.extend(extra);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> impl Iterator<Item = OsString> {
        v.iter().map(OsString::from).collect::<Vec<_>>().into_iter()
    }

    #[test]
    fn parse_normalizes_keys_and_skips_comments() {
        let kv = parse("# c\n mad_k = 2.5 # trailing\n--plot=true\n\n").unwrap();
        assert_eq!(
            kv,
            vec![
                ("mad-k".into(), "2.5".into()),
                ("plot".into(), "true".into())
            ]
        );
        assert!(parse("novalue").is_err());
    }

    #[test]
    fn command_line_wins_and_unknown_keys_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "kernel=21\nmethod=mad\nperplexity=5\nplot=true\n").unwrap();
        let args = merged_args(os(&[
            "gazelab",
            "clean",
            "--config",
            cfg.to_str().unwrap(),
            "--method",
            "iqr",
        ]))
        .unwrap();
        let tail: Vec<&str> = args[5..].iter().map(String::as_str).collect();
        assert_eq!(tail, ["iqr", "--kernel", "21", "--plot"]);
    }
}
