//! Plain-text run configuration: `key = value` lines, optionally grouped
//! under `[section]` headers. Keys name command-line flags; flags given on
//! the command line win.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Command};

#[derive(Debug, Default, PartialEq)]
pub struct ConfigFile {
    /// Keys before any section header.
    pub global: BTreeMap<String, String>,
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let mut cfg = ConfigFile::default();
    let mut section: Option<String> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                bail!("config line {}: unterminated section header", n + 1);
            };
            section = Some(name.trim().to_owned());
            cfg.sections.entry(name.trim().to_owned()).or_default();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key = value", n + 1);
        };
        let target = match &section {
            Some(s) => cfg.sections.entry(s.clone()).or_default(),
            None => &mut cfg.global,
        };
        target.insert(normalize(key), value.trim().trim_matches('"').to_owned());
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text)
}

/// Position of the subcommand name in `argv`, skipping global options.
fn subcommand_index(app: &Command, argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let arg = argv[i].to_string_lossy();
        if let Some(flag) = arg.strip_prefix("--") {
            let takes_value = app
                .get_arguments()
                .find(|a| a.get_long() == Some(flag))
                .is_some_and(|a| a.get_action().takes_values());
            i += if takes_value { 2 } else { 1 };
        } else if arg.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

/// Append `--key value` for every configured flag of the chosen subcommand
/// that the command line does not already set. Keys in the subcommand's own
/// section must exist; global keys apply wherever the flag exists.
pub fn merge_args(app: &Command, argv: Vec<OsString>, cfg: &ConfigFile) -> Result<Vec<OsString>> {
    let Some(at) = subcommand_index(app, &argv) else { return Ok(argv) };
    let name = argv[at].to_string_lossy().into_owned();
    let Some(sub) = app.find_subcommand(&name) else { return Ok(argv) };
    let given: Vec<String> = argv[at + 1..]
        .iter()
        .filter_map(|a| a.to_str()?.strip_prefix("--").map(|f| f.split('=').next().unwrap_or(f).to_owned()))
        .collect();

    let mut merged: BTreeMap<&str, (&str, bool)> = BTreeMap::new();
    for (k, v) in &cfg.global {
        merged.insert(k, (v, false));
    }
    for (k, v) in cfg.sections.get(&name).into_iter().flatten() {
        merged.insert(k, (v, true));
    }

    let mut out = argv.clone();
    for (key, (value, strict)) in merged {
        let Some(arg) = sub.get_arguments().chain(app.get_arguments()).find(|a| a.get_long() == Some(key)) else {
            if strict {
                bail!("config section [{name}]: unknown key '{key}'");
            }
            continue;
        };
        if given.iter().any(|g| g == key) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value {
                "true" | "yes" | "1" => out.push(format!("--{key}").into()),
                "false" | "no" | "0" => {}
                other => bail!("config key '{key}': expected a boolean, got '{other}'"),
            },
            ArgAction::Append => {
                for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    out.push(format!("--{key}").into());
                    out.push(part.into());
                }
            }
            _ => {
                out.push(format!("--{key}").into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::{Arg, Command};

    fn app() -> Command {
        Command::new("t")
            .arg(Arg::new("config").long("config").global(true))
            .subcommand(
                Command::new("run")
                    .arg(Arg::new("n-best").long("n-best"))
                    .arg(Arg::new("oracle").long("oracle").action(ArgAction::SetTrue))
                    .arg(Arg::new("detections").long("detections").action(ArgAction::Append)),
            )
    }

    fn argv(args: &[&str]) -> Vec<OsString> {
        args.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_sections_and_comments() {
        let cfg = parse_config("seed = 3 # comment\n\n[run]\nn_best = 7\noracle = true\n").unwrap();
        assert_eq!(cfg.global["seed"], "3");
        assert_eq!(cfg.sections["run"]["n-best"], "7");
        assert!(parse_config("[run\n").is_err());
        assert!(parse_config("novalue\n").is_err());
    }

    #[test]
    fn command_line_wins() {
        let cfg = parse_config("[run]\nn-best = 7\noracle = yes\ndetections = a.csv, b.csv\n").unwrap();
        let out = merge_args(&app(), argv(&["t", "run", "--n-best", "2"]), &cfg).unwrap();
        assert_eq!(
            out,
            argv(&["t", "run", "--n-best", "2", "--detections", "a.csv", "--detections", "b.csv", "--oracle"])
        );
        let m = app().get_matches_from(out);
        assert_eq!(m.subcommand_matches("run").unwrap().get_one::<String>("n-best").unwrap(), "2");
    }

    #[test]
    fn unknown_keys() {
        let strict = parse_config("[run]\nbogus = 1\n").unwrap();
        assert!(merge_args(&app(), argv(&["t", "run"]), &strict).is_err());
        let loose = parse_config("bogus = 1\n").unwrap();
        assert_eq!(merge_args(&app(), argv(&["t", "run"]), &loose).unwrap(), argv(&["t", "run"]));
    }

    #[test]
    fn skips_global_options_before_subcommand() {
        let cfg = parse_config("[run]\nn-best = 4\n").unwrap();
        let out = merge_args(&app(), argv(&["t", "--config", "x.cfg", "run"]), &cfg).unwrap();
        assert_eq!(out.last().unwrap(), "4");
    }
}
