//! `key = value` experiment files merged into the command line. Keys are
//! long flag names of the chosen subcommand; flags given on the command
//! line win over the file.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::Command;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: String, line: usize },
    #[error("{path}:{line}: `{key}` is not an option of `{command}`")]
    UnknownKey {
        path: String,
        line: usize,
        key: String,
        command: String,
    },
    #[error("{path}:{line}: `{key}` expects true or false, got `{value}`")]
    NotABool {
        path: String,
        line: usize,
        key: String,
        value: String,
    },
}

/// Parse `key = value` lines; `#` starts a comment line.
pub fn parse(text: &str, path: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                path: path.into(),
                line: i + 1,
            });
        };
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                path: path.into(),
                line: i + 1,
            });
        }
        out.push((i + 1, key, v.trim().to_owned()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<String> {
    let mut iter = args.iter().map(|a| a.to_string_lossy());
    while let Some(a) = iter.next() {
        if a == "--" {
            break;
        }
        if a == "--config" {
            return iter.next().map(|s| s.into_owned());
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_owned());
        }
    }
    None
}

fn given_on_command_line(args: &[OsString], long: &str) -> bool {
    let flag = format!("--{long}");
    let prefix = format!("--{long}=");
    args.iter()
        .map(|a| a.to_string_lossy())
        .take_while(|a| a != "--")
        .any(|a| a == flag || a.starts_with(&prefix))
}

/// Append options from the `--config` file that the command line does not
/// already set. Returns the arguments unchanged without `--config`.
pub fn merge(args: Vec<OsString>, cli: &Command) -> Result<Vec<OsString>, ConfigError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(Path::new(&path)).map_err(|source| ConfigError::Read {
        path: path.clone(),
        source,
    })?;
    let entries = parse(&text, &path)?;
    // The subcommand is the first argument naming one.
    let sub = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .find_map(|a| cli.find_subcommand(&a).cloned());
    let Some(sub) = sub else {
        return Ok(args);
    };
    let mut merged = args.clone();
    let mut extra = Vec::new();
    for (line, key, value) in entries {
        let arg = sub
            .get_arguments()
            .chain(cli.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()));
        let Some(arg) = arg else {
            return Err(ConfigError::UnknownKey {
                path,
                line,
                key,
                command: sub.get_name().to_owned(),
            });
        };
        if key == "config" || given_on_command_line(&args, &key) {
            continue;
        }
        if arg.get_action().takes_values() {
            extra.push(OsString::from(format!("--{key}")));
            extra.push(OsString::from(value));
        } else {
            match value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => extra.push(OsString::from(format!("--{key}"))),
                "false" | "no" | "0" => {}
                _ => {
                    return Err(ConfigError::NotABool {
                        path,
                        line,
                        key,
                        value,
                    })
                }
            }
        }
    }
    // Keep anything after `--` at the end.
    let split = merged.iter().position(|a| a == "--").unwrap_or(merged.len());
    let tail = merged.split_off(split);
    merged.extend(extra);
    merged.extend(tail);
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::{Arg, ArgAction};

    fn cli() -> Command {
        Command::new("t")
            .arg(Arg::new("config").long("config").global(true))
            .subcommand(
                Command::new("train")
                    .arg(Arg::new("vocab-size").long("vocab-size"))
                    .arg(Arg::new("no-lowercase").long("no-lowercase").action(ArgAction::SetTrue)),
            )
    }

    fn args(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "# comment\nvocab_size = 500\nno-lowercase = true\n").unwrap();
        let p = path.to_str().unwrap();
        let merged = merge(args(&["t", "train", "--config", p, "--vocab-size", "9"]), &cli()).unwrap();
        assert_eq!(merged, args(&["t", "train", "--config", p, "--vocab-size", "9", "--no-lowercase"]));
        let merged = merge(args(&["t", "train", "--config", p]), &cli()).unwrap();
        assert_eq!(merged, args(&["t", "train", "--config", p, "--vocab-size", "500", "--no-lowercase"]));
    }

    #[test]
    fn bad_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "colour = blue\n").unwrap();
        let p = path.to_str().unwrap();
        assert!(matches!(
            merge(args(&["t", "train", "--config", p]), &cli()),
            Err(ConfigError::UnknownKey { .. })
        ));
        fs::write(&path, "just words\n").unwrap();
        assert!(matches!(
            merge(args(&["t", "train", "--config", p]), &cli()),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        fs::write(&path, "no-lowercase = maybe\n").unwrap();
        assert!(merge(args(&["t", "train", "--config", p]), &cli()).is_err());
    }
}
