//! Optional plain-text run configuration: `key = value` lines, `#`
//! comments. Command-line flags always override file values.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::CliError;

/// Every key any subcommand understands. Keys outside this set are
/// rejected so that typos fail loudly; keys a given subcommand does not
/// use are ignored, which lets one file drive several subcommands.
const KNOWN_KEYS: &[&str] = &[
    "dist", "papr", "snr_db", "start_db", "stop_db", "points", "out", "columns", "samples",
    "seed", "chunk", "policy", "grid",
];

#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Failure(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config line {} is not `key = value`: {raw:?}",
                    idx + 1
                )));
            };
            let key = key.trim().replace('-', "_");
            let value = value.trim().to_owned();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("unknown config key {key:?}")));
            }
            if values.insert(key.clone(), value).is_some() {
                return Err(CliError::Usage(format!("duplicate config key {key:?}")));
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Flag value if given, else the config value parsed with `parse`.
pub fn merge<T, F>(
    flag: Option<T>,
    cfg: &FileConfig,
    key: &str,
    parse: F,
) -> Result<Option<T>, CliError>
where
    F: FnOnce(&str) -> Result<T, CliError>,
{
    if flag.is_some() {
        return Ok(flag);
    }
    cfg.get(key).map(parse).transpose()
}

/// As `merge`, but the setting must end up present one way or the other.
pub fn require<T, F>(flag: Option<T>, cfg: &FileConfig, key: &str, parse: F) -> Result<T, CliError>
where
    F: FnOnce(&str) -> Result<T, CliError>,
{
    merge(flag, cfg, key, parse)?
        .ok_or_else(|| CliError::Usage(format!("missing required setting `{}`", key.replace('_', "-"))))
}

pub fn parse_f64(key: &str) -> impl Fn(&str) -> Result<f64, CliError> + '_ {
    move |s| {
        s.parse::<f64>()
            .map_err(|_| CliError::Usage(format!("{key}: expected a number, got {s:?}")))
    }
}

pub fn parse_u64(key: &str) -> impl Fn(&str) -> Result<u64, CliError> + '_ {
    move |s| {
        s.parse::<u64>()
            .map_err(|_| CliError::Usage(format!("{key}: expected an integer, got {s:?}")))
    }
}

pub fn parse_usize(key: &str) -> impl Fn(&str) -> Result<usize, CliError> + '_ {
    move |s| {
        s.parse::<usize>()
            .map_err(|_| CliError::Usage(format!("{key}: expected a count, got {s:?}")))
    }
}
