//! `key = value` config files. Values become flags appended after the
//! command line, skipped when the same flag is already present, so flags
//! override the file and the file overrides defaults.

use std::ffi::OsString;
use std::path::Path;

use crate::error::CliError;

/// Flags that only make sense on the command line.
const RESERVED: &[&str] = &["config", "help", "version"];

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-").to_ascii_lowercase();
        if key.is_empty() || RESERVED.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: invalid key '{}'", i + 1, k.trim())));
        }
        out.push((key, unquote(v.trim()).to_string()));
    }
    Ok(out)
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

/// Path given by `--config`, if any.
pub fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// `argv` extended by config entries whose flag is not already given.
pub fn merge(argv: Vec<OsString>, entries: &[(String, String)]) -> Vec<OsString> {
    let given = |key: &str| {
        argv.iter().any(|a| {
            let s = a.to_string_lossy();
            s == format!("--{key}") || s.starts_with(&format!("--{key}="))
        })
    };
    let mut extra = Vec::new();
    for (k, v) in entries {
        if given(k) {
            continue;
        }
        match v.to_ascii_lowercase().as_str() {
            "true" => extra.push(OsString::from(format!("--{k}"))),
            "false" => {}
            _ => extra.push(OsString::from(format!("--{k}={v}"))),
        }
    }
    let mut out = argv;
    let split = out.iter().position(|a| a == "--").unwrap_or(out.len());
    out.splice(split..split, extra);
    out
}

pub fn load(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    Ok(merge(argv, &parse_config(&text)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn flags_override_file_values() {
        let entries = parse_config("# comment\neps = 0.2\nkernel = \"matern:d=2,n=3\"\nsvg = true\nthreshold=1e-10 # trailing\n").unwrap();
        assert_eq!(entries[1], ("kernel".into(), "matern:d=2,n=3".into()));
        let merged = merge(os(&["specrkhs", "eig", "--eps", "0.5"]), &entries);
        assert_eq!(
            merged,
            os(&["specrkhs", "eig", "--eps", "0.5", "--kernel=matern:d=2,n=3", "--svg", "--threshold=1e-10"])
        );
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_config("eps 0.2").is_err());
        assert!(parse_config("config = x").is_err());
        assert!(parse_config(" = 3").is_err());
    }

    #[test]
    fn finds_config_path() {
        assert_eq!(config_path(&os(&["x", "--config", "a.cfg"])), Some("a.cfg".into()));
        assert_eq!(config_path(&os(&["x", "--config=b.cfg"])), Some("b.cfg".into()));
        assert_eq!(config_path(&os(&["x", "eig"])), None);
    }
}
