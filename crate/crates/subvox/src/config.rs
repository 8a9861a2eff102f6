//! Flat key-value configuration files.
//!
//! One `key = value` pair per line, `#` comments, blank lines ignored.
//! A config file supplies *defaults*; command-line flags always win.
//! The file is named by `--config` or, failing that, the
//! [`ENV_CONFIG`] environment variable.
//!
//! Recognized keys (anything else is an error, so typos surface):
//!
//! | key              | type  | consumed by                  |
//! |------------------|-------|------------------------------|
//! | `window_seconds` | float | transcribe, translate        |
//! | `context`        | bool  | transcribe, translate        |
//! | `context_depth`  | int   | transcribe, translate        |
//! | `max_new_tokens` | int   | transcribe, translate        |
//! | `steps`          | int   | train                        |
//! | `batch_size`     | int   | train                        |
//! | `warmup_steps`   | int   | train                        |
//! | `peak_lr`        | float | train                        |
//! | `seed`           | int   | train, gen-synth             |

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

/// Environment variable naming the default config file.
pub const ENV_CONFIG: &str = "SUBVOX_CONFIG";

const KNOWN_KEYS: [&str; 9] = [
    "window_seconds",
    "context",
    "context_depth",
    "max_new_tokens",
    "steps",
    "batch_size",
    "warmup_steps",
    "peak_lr",
    "seed",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line}: expected `key = value`, got {got:?}")]
    Malformed { path: String, line: usize, got: String },
    #[error("{path} line {line}: unknown key {key:?}")]
    UnknownKey { path: String, line: usize, key: String },
    #[error("{path}: key {key:?}: {message}")]
    BadValue { path: String, key: String, message: String },
}

/// A parsed config file. All values stay strings until a typed getter
/// interprets them, so one bad value only fails the command that
/// actually uses it.
#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    path: String,
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn parse(path: &Path, text: &str) -> Result<Self, ConfigError> {
        let path_str = path.display().to_string();
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Malformed {
                    path: path_str,
                    line: n + 1,
                    got: line.to_string(),
                });
            };
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    path: path_str,
                    line: n + 1,
                    key: key.to_string(),
                });
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Self { path: path_str, values })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(path, &text)
    }

    /// Resolve the active config: the explicit path if given, else the
    /// [`ENV_CONFIG`] file, else an empty config. An explicit or
    /// env-named file that does not load is an error — silently
    /// ignoring it would make flags appear to misbehave.
    pub fn discover(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        match explicit {
            Some(path) => Self::load(path),
            None => match std::env::var_os(ENV_CONFIG) {
                Some(path) => Self::load(Path::new(&path)),
                None => Ok(Self::default()),
            },
        }
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        debug_assert!(KNOWN_KEYS.contains(&key), "getter for undocumented key {key}");
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| ConfigError::BadValue {
                path: self.path.clone(),
                key: key.to_string(),
                message: format!("cannot parse {raw:?}"),
            }),
        }
    }

    pub fn float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key)
    }

    pub fn int(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.get(key)
    }

    pub fn seed(&self) -> Result<Option<u64>, ConfigError> {
        self.get("seed")
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.values.get(key).map(String::as_str) {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(raw) => Err(ConfigError::BadValue {
                path: self.path.clone(),
                key: key.to_string(),
                message: format!("expected true or false, got {raw:?}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<FileConfig, ConfigError> {
        FileConfig::parse(Path::new("test.conf"), text)
    }

    #[test]
    fn parses_keys_comments_and_blanks() {
        let cfg = parse(
            "# decoding defaults\n\
             window_seconds = 12.5\n\
             \n\
             context = false\n\
             max_new_tokens=96\n",
        )
        .unwrap();
        assert_eq!(cfg.float("window_seconds").unwrap(), Some(12.5));
        assert_eq!(cfg.bool("context").unwrap(), Some(false));
        assert_eq!(cfg.int("max_new_tokens").unwrap(), Some(96));
        assert_eq!(cfg.int("steps").unwrap(), None);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = parse("windowseconds = 3\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 1, .. }), "{err}");
    }

    #[test]
    fn missing_equals_rejected() {
        let err = parse("window_seconds 3\n").unwrap_err();
        assert!(matches!(err, ConfigError::Malformed { line: 1, .. }));
    }

    #[test]
    fn bad_values_name_the_key() {
        let cfg = parse("steps = soon\n").unwrap();
        let err = cfg.int("steps").unwrap_err();
        assert!(err.to_string().contains("steps"), "{err}");
        let cfg = parse("context = yes\n").unwrap();
        assert!(cfg.bool("context").is_err());
    }

    #[test]
    fn discover_prefers_explicit_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("conf");
        std::fs::write(&path, "seed = 9\n").unwrap();
        let cfg = FileConfig::discover(Some(&path)).unwrap();
        assert_eq!(cfg.seed().unwrap(), Some(9));
        // A named-but-missing file must error, not silently vanish.
        assert!(FileConfig::discover(Some(&dir.path().join("gone"))).is_err());
    }
}
