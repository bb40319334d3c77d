//! Flat key-value run configuration with dotted section names.
//!
//! Unknown keys are errors: every key must be consumed by the command that
//! runs. `--override key=value` entries replace file values.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use crate::CliError;

/// Parsed but uninterpreted configuration text.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", lineno + 1)));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(CliError::Config(format!("duplicate key: {key}")));
            }
        }
        Ok(RawConfig { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies a `key=value` override, replacing any file value.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), CliError> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override {spec:?}: expected key=value")))?;
        self.entries.insert(key.trim().to_string(), value.trim().to_string());
        Ok(())
    }

    /// Canonical text (sorted keys), the input of the config hash.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// FNV-1a 64 hash of the canonical text, as fixed-width hex.
    pub fn hash_hex(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.canonical_text().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

/// Typed accessor that tracks key consumption; leftover keys are errors.
pub struct ConfigReader {
    raw: RawConfig,
    used: BTreeSet<String>,
}

impl ConfigReader {
    pub fn new(raw: RawConfig) -> Self {
        ConfigReader { raw, used: BTreeSet::new() }
    }

    pub fn hash_hex(&self) -> String {
        self.raw.hash_hex()
    }

    fn take(&mut self, key: &str) -> Option<String> {
        let v = self.raw.entries.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    pub fn str_opt(&mut self, key: &str) -> Option<String> {
        self.take(key)
    }

    pub fn str_or(&mut self, key: &str, default: &str) -> String {
        self.take(key).unwrap_or_else(|| default.to_string())
    }

    pub fn require_str(&mut self, key: &str) -> Result<String, CliError> {
        self.take(key)
            .ok_or_else(|| CliError::Config(format!("missing required key: {key}")))
    }

    fn parse_as<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
        v.parse()
            .map_err(|_| CliError::Config(format!("key {key}: cannot parse {v:?}")))
    }

    pub fn f64_opt(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        self.take(key).map(|v| Self::parse_as(key, &v)).transpose()
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn u64_opt(&mut self, key: &str) -> Result<Option<u64>, CliError> {
        self.take(key)
            .map(|v| {
                // Accept scientific notation for counts (1e6 and friends).
                if let Ok(n) = v.parse::<u64>() {
                    return Ok(n);
                }
                let f: f64 = Self::parse_as(key, &v)?;
                if f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 {
                    Ok(f as u64)
                } else {
                    Err(CliError::Config(format!("key {key}: {v:?} is not a whole count")))
                }
            })
            .transpose()
    }

    pub fn u64_or(&mut self, key: &str, default: u64) -> Result<u64, CliError> {
        Ok(self.u64_opt(key)?.unwrap_or(default))
    }

    pub fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self.u64_or(key, default as u64)? as usize)
    }

    pub fn bool_or(&mut self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => match v.as_str() {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(CliError::Config(format!("key {key}: expected bool, got {other:?}"))),
            },
        }
    }

    pub fn f64_list_opt(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.take(key)
            .map(|v| {
                v.split(',')
                    .map(|t| Self::parse_as(key, t.trim()))
                    .collect::<Result<Vec<f64>, _>>()
            })
            .transpose()
    }

    pub fn str_list_opt(&mut self, key: &str) -> Option<Vec<String>> {
        self.take(key)
            .map(|v| v.split(',').map(|t| t.trim().to_string()).collect())
    }

    pub fn path_opt(&mut self, key: &str) -> Option<PathBuf> {
        self.take(key).map(PathBuf::from)
    }

    /// Fails if any configured key was never consumed.
    pub fn finish(self) -> Result<(), CliError> {
        let unknown: Vec<_> = self
            .raw
            .entries
            .keys()
            .filter(|k| !self.used.contains(*k))
            .cloned()
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!("unknown keys: {}", unknown.join(", "))))
        }
    }
}
