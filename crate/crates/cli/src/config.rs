//! `--config` files: a flat TOML table whose keys are long flag names
//! (underscores and dashes both accepted). Values from the file are spliced
//! in before the command-line flags, so explicit flags win.

use std::ffi::OsString;
use std::path::Path;

use crate::CliError;

/// Converts one flat TOML document into `--key value` arguments.
pub fn config_to_args(text: &str) -> Result<Vec<OsString>, CliError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| CliError::Usage(format!("config file: {e}")))?;
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" {
            continue;
        }
        match value {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>().map_err(|e| CliError::Usage(format!("config key {key}: {e}")))?;
                out.push(flag.into());
                out.push(parts.join(",").into());
            }
            other => {
                out.push(flag.into());
                out.push(scalar(&other).map_err(|e| CliError::Usage(format!("config key {key}: {e}")))?.into());
            }
        }
    }
    Ok(out)
}

fn scalar(v: &toml::Value) -> Result<String, String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        _ => Err("nested tables and dates are not supported".into()),
    }
}

/// Finds `--config PATH` (or `--config=PATH`) and splices the file's flags
/// in right after the subcommand.
pub fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", Path::new(&path).display())))?;
    let extra = config_to_args(&text)?;
    if argv.len() < 2 {
        return Ok(argv);
    }
    let mut out = argv[..2].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[2..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_keys_become_flags() {
        let args = config_to_args("lambda = 2.5\neps_grid = [0.0, 0.1]\nsvg = true\nsequential = false\ndataset = \"uos\"\n").unwrap();
        let args: Vec<String> = args.into_iter().map(|a| a.into_string().unwrap()).collect();
        assert_eq!(args, ["--dataset", "uos", "--eps-grid", "0,0.1", "--lambda", "2.5", "--svg"]);
    }

    #[test]
    fn nested_tables_are_rejected() {
        assert!(matches!(config_to_args("[a]\nb = 1\n"), Err(CliError::Usage(_))));
    }
}
