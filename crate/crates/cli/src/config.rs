//! Flat key-value configuration with section headers.
//!
//! Grammar: blank lines and `#` comments are ignored; `[name]` opens a
//! section; `key = value` assigns within the current section. Values are
//! plain tokens or comma-separated lists. Every key must be consumed by
//! the experiment that runs the config; leftovers are rejected.

use std::collections::BTreeMap;

use rfim_core::rfim::FieldKind;

#[derive(Debug, Clone)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Parsed configuration with consumption tracking.
#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<(String, String), String>,
    consumed: std::sync::Mutex<std::collections::BTreeSet<(String, String)>>,
}

impl Clone for Config {
    fn clone(&self) -> Self {
        Config {
            entries: self.entries.clone(),
            consumed: std::sync::Mutex::new(self.consumed.lock().unwrap().clone()),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                if section.is_empty() {
                    return err(format!("line {}: empty section name", lineno + 1));
                }
                continue;
            }
            let (key, value) = match line.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => return err(format!("line {}: expected key = value", lineno + 1)),
            };
            if section.is_empty() {
                return err(format!("line {}: key outside any section", lineno + 1));
            }
            if key.is_empty() {
                return err(format!("line {}: empty key", lineno + 1));
            }
            let slot = (section.clone(), key.to_string());
            if entries.insert(slot, value.to_string()).is_some() {
                return err(format!("line {}: duplicate key {section}.{key}", lineno + 1));
            }
        }
        Ok(Config { entries, consumed: Default::default() })
    }

    pub fn load(path: &std::path::Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Config::parse(&text)
    }

    fn take(&self, section: &str, key: &str) -> Option<&str> {
        let slot = (section.to_string(), key.to_string());
        let v = self.entries.get(&slot)?;
        self.consumed.lock().unwrap().insert(slot);
        Some(v.as_str())
    }

    pub fn get_str(&self, section: &str, key: &str) -> Result<String, ConfigError> {
        match self.take(section, key) {
            Some(v) => Ok(v.to_string()),
            None => err(format!("missing {section}.{key}")),
        }
    }

    pub fn get_str_or(&self, section: &str, key: &str, default: &str) -> String {
        self.take(section, key).unwrap_or(default).to_string()
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        self.get_str(section, key)?
            .parse()
            .map_err(|_| ConfigError(format!("{section}.{key} must be a real number")))
    }

    pub fn get_f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.take(section, key) {
            Some(v) => {
                v.parse().map_err(|_| ConfigError(format!("{section}.{key} must be a real number")))
            }
            None => Ok(default),
        }
    }

    pub fn get_u64(&self, section: &str, key: &str) -> Result<u64, ConfigError> {
        self.get_str(section, key)?
            .parse()
            .map_err(|_| ConfigError(format!("{section}.{key} must be a nonnegative integer")))
    }

    pub fn get_u64_or(&self, section: &str, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.take(section, key) {
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("{section}.{key} must be a nonnegative integer"))),
            None => Ok(default),
        }
    }

    pub fn get_usize(&self, section: &str, key: &str) -> Result<usize, ConfigError> {
        Ok(self.get_u64(section, key)? as usize)
    }

    pub fn get_usize_or(
        &self,
        section: &str,
        key: &str,
        default: usize,
    ) -> Result<usize, ConfigError> {
        Ok(self.get_u64_or(section, key, default as u64)? as usize)
    }

    pub fn get_i64(&self, section: &str, key: &str) -> Result<i64, ConfigError> {
        self.get_str(section, key)?
            .parse()
            .map_err(|_| ConfigError(format!("{section}.{key} must be an integer")))
    }

    pub fn get_i64_list(&self, section: &str, key: &str) -> Result<Vec<i64>, ConfigError> {
        self.get_str(section, key)?
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| ConfigError(format!("{section}.{key} must be integers")))
            })
            .collect()
    }

    pub fn get_f64_list(&self, section: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.get_str(section, key)?
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| ConfigError(format!("{section}.{key} must be real numbers")))
            })
            .collect()
    }

    /// Field law from the `[model]` section: `field = gaussian|two-point|
    /// uniform|zero` with `sigma2` or `a` as the parameter.
    pub fn field_kind(&self, n_sites: usize) -> Result<FieldKind, ConfigError> {
        let kind = self.get_str("model", "field")?;
        match kind.as_str() {
            "gaussian" => Ok(FieldKind::Gaussian { sigma2: self.get_f64("model", "sigma2")? }),
            "two-point" => Ok(FieldKind::TwoPoint { a: self.get_f64("model", "a")? }),
            "uniform" => Ok(FieldKind::UniformSymmetric { a: self.get_f64("model", "a")? }),
            "zero" => Ok(FieldKind::Fixed { values: vec![0.0; n_sites] }),
            other => err(format!("unknown field kind `{other}`")),
        }
    }

    /// Error if any parsed key was never consumed.
    pub fn reject_unknown(&self) -> Result<(), ConfigError> {
        let consumed = self.consumed.lock().unwrap();
        let leftover: Vec<String> = self
            .entries
            .keys()
            .filter(|slot| !consumed.contains(*slot))
            .map(|(s, k)| format!("{s}.{k}"))
            .collect();
        if leftover.is_empty() {
            Ok(())
        } else {
            err(format!("unknown keys: {}", leftover.join(", ")))
        }
    }

    /// Resolved entries for the manifest, sorted.
    pub fn resolved(&self) -> Vec<(String, String, String)> {
        self.entries.iter().map(|((s, k), v)| (s.clone(), k.clone(), v.clone())).collect()
    }
}
