//! Config-file and environment handling.
//!
//! A config file holds `key=value` lines (keys are long flag names without
//! the leading dashes, `#` starts a comment). File values become defaults:
//! any flag given on the command line wins. Unknown keys are rejected.

const KNOWN_KEYS: &[&str] = &[
    "method", "model", "nu", "ell", "alpha", "n", "d", "count", "seed", "threads", "out",
    "batches", "bounds", "mesh", "extension", "columns", "max-factor",
];

/// Splits argv at the subcommand, loads `--config` if present, and
/// appends file-provided defaults for flags not already on the line.
pub fn merge_config_args(argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut config_path: Option<String> = None;
    let mut iter = argv.iter().enumerate();
    while let Some((i, arg)) = iter.next() {
        if arg == "--config" {
            config_path = argv.get(i + 1).cloned();
            if config_path.is_none() {
                return Err("--config needs a file path".into());
            }
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config_path = Some(path.to_string());
        }
    }
    let Some(path) = config_path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read config file {path}: {e}"))?;
    let mut extra: Vec<String> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("{path}:{}: expected key=value, got `{line}`", lineno + 1));
        };
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(format!("{path}:{}: unknown key `{key}`", lineno + 1));
        }
        let flag = format!("--{key}");
        let already = argv.iter().any(|a| a == &flag || a.starts_with(&format!("{flag}=")));
        if !already {
            if value.eq_ignore_ascii_case("true") {
                extra.push(flag);
            } else {
                extra.push(flag);
                extra.push(value.to_string());
            }
        }
    }
    let mut merged = argv;
    merged.extend(extra);
    Ok(merged)
}

/// Default output root: `GRF_OUT_DIR` if set, else the current directory.
pub fn default_out_dir() -> std::path::PathBuf {
    std::env::var_os("GRF_OUT_DIR")
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::path::PathBuf::from("."))
}
