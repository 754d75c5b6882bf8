//! Key-value config files. Each `key = value` pair becomes `--key value`
//! and is inserted right after the subcommand name, ahead of the user's
//! flags, so a flag given on the command line overrides the file.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use toml::Value;

/// Removes `--config PATH` (or `--config=PATH`) from `argv` and splices the
/// file's contents in as flags. Returns `argv` unchanged when no config file
/// is named.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut iter = argv.into_iter();
    while let Some(arg) = iter.next() {
        match arg.to_str() {
            Some("--config") => match iter.next() {
                Some(p) => path = Some(p),
                None => return Err("--config needs a file path".into()),
            },
            Some(s) if s.starts_with("--config=") => path = Some(s["--config=".len()..].into()),
            _ => rest.push(arg),
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let flags = load(Path::new(&path))?;
    // argv[0] is the program; the subcommand is the first non-flag after it.
    let at = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map_or(rest.len(), |i| i + 2);
    rest.splice(at..at, flags);
    Ok(rest)
}

fn load(path: &Path) -> Result<Vec<OsString>, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| format!("invalid config {}: {e}", path.display()))?;
    let mut flags = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            Value::Boolean(true) => flags.push(flag.into()),
            Value::Boolean(false) => {}
            other => {
                flags.push(flag.into());
                flags.push(scalar(&key, &other)?.into());
            }
        }
    }
    Ok(flags)
}

fn scalar(key: &str, value: &Value) -> Result<String, String> {
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(f) => Ok(f.to_string()),
        Value::Array(items) => items
            .iter()
            .map(|v| scalar(key, v))
            .collect::<Result<Vec<_>, _>>()
            .map(|parts| parts.join(",")),
        _ => Err(format!("config key {key} has an unsupported value type")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn os(args: &[&str]) -> Vec<OsString> {
        args.iter().map(OsString::from).collect()
    }

    #[test]
    fn no_config_is_identity() {
        let argv = os(&["ge-aoi", "analytic", "--eta", "0"]);
        assert_eq!(expand(argv.clone()).unwrap(), argv);
    }

    #[test]
    fn config_flags_precede_command_line_flags() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "eta = 0.5\npe_good = 0.2\npolicies = [\"fcfs\"]").unwrap();
        let path = file.path().to_str().unwrap();
        let argv = os(&["ge-aoi", "--config", path, "sweep", "--eta", "0"]);
        let out = expand(argv).unwrap();
        let out: Vec<_> = out.iter().map(|s| s.to_str().unwrap()).collect();
        assert_eq!(out[..2], ["ge-aoi", "sweep"]);
        assert_eq!(out[out.len() - 2..], ["--eta", "0"]);
        assert!(out.contains(&"--pe-good"));
        assert!(out.contains(&"fcfs"));
    }
}
