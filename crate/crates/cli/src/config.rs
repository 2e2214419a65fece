//! Flat key=value run configuration with flag-over-file precedence.
//!
//! A config file holds one `key=value` pair per line; `#` starts a comment
//! and blank lines are ignored. Keys use the long flag names without the
//! leading dashes. A value given on the command line wins over the file,
//! and the file wins over the built-in default.
//!
//! Every run writes the fully resolved configuration (defaults expanded) to
//! a file next to its outputs. The SHA-256 hash of that rendered text is the
//! run's config hash; artifacts embed it so they can be traced back to the
//! exact settings that produced them.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use gappy_dmap::persist::bytes_hash;
use gappy_dmap::{Error, Result};

pub struct ConfigFile {
    map: BTreeMap<String, String>,
    origin: String,
}

impl ConfigFile {
    pub fn empty() -> Self {
        ConfigFile {
            map: BTreeMap::new(),
            origin: "<none>".into(),
        }
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile::empty());
        };
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(origin.clone(), e))?;
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::format(
                    origin.clone(),
                    format!("line {}: expected key=value, got '{raw}'", lineno + 1),
                ));
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { map, origin })
    }

    /// Looks a key up and parses it, reporting the file and key on failure.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some(raw) = self.map.get(key) else {
            return Ok(None);
        };
        raw.parse::<T>().map(Some).map_err(|_| {
            Error::format(
                self.origin.clone(),
                format!("key '{key}': cannot parse '{raw}'"),
            )
        })
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        let Some(raw) = self.map.get(key) else {
            return Ok(None);
        };
        parse_bool(raw).map(Some).map_err(|_| {
            Error::format(
                self.origin.clone(),
                format!("key '{key}': expected true/false, got '{raw}'"),
            )
        })
    }

    pub fn get_string(&self, key: &str) -> Option<String> {
        self.map.get(key).cloned()
    }
}

pub fn parse_bool(raw: &str) -> std::result::Result<bool, String> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(format!("expected true/false, got '{other}'")),
    }
}

/// Three-way resolution: command-line flag, then config file, then default.
pub fn resolve<T: FromStr>(flag: Option<T>, cfg: &ConfigFile, key: &str, default: T) -> Result<T> {
    Ok(flag.or(cfg.get(key)?).unwrap_or(default))
}

pub fn resolve_opt<T: FromStr>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> Result<Option<T>> {
    Ok(flag.or(cfg.get(key)?))
}

pub fn resolve_bool(
    flag: Option<bool>,
    cfg: &ConfigFile,
    key: &str,
    default: bool,
) -> Result<bool> {
    Ok(flag.or(cfg.get_bool(key)?).unwrap_or(default))
}

pub fn resolve_string(
    flag: Option<String>,
    cfg: &ConfigFile,
    key: &str,
    default: &str,
) -> Result<String> {
    Ok(flag
        .or_else(|| cfg.get_string(key))
        .unwrap_or_else(|| default.to_string()))
}

pub fn resolve_opt_string(
    flag: Option<String>,
    cfg: &ConfigFile,
    key: &str,
) -> Result<Option<String>> {
    Ok(flag.or_else(|| cfg.get_string(key)))
}

/// The fully resolved settings of one run, in deterministic key order.
pub struct Resolved {
    map: BTreeMap<String, String>,
    notes: BTreeMap<String, String>,
}

impl Resolved {
    pub fn new(command: &str) -> Self {
        let mut map = BTreeMap::new();
        map.insert("command".to_string(), command.to_string());
        Resolved {
            map,
            notes: BTreeMap::new(),
        }
    }

    pub fn put<V: Display>(&mut self, key: &str, value: V) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn put_opt<V: Display>(&mut self, key: &str, value: &Option<V>) {
        match value {
            Some(v) => self.put(key, v),
            None => self.put(key, "none"),
        }
    }

    /// Records provenance that describes the run's inputs rather than its
    /// settings; notes appear as comments and do not enter the config hash.
    pub fn note<V: Display>(&mut self, key: &str, value: V) {
        self.notes.insert(key.to_string(), value.to_string());
    }

    fn render_body(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.map {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Hash of the rendered settings; identical settings give identical
    /// hashes regardless of how they were supplied.
    pub fn hash(&self) -> String {
        bytes_hash(self.render_body().as_bytes())
    }

    /// Writes the resolved config file, headed by its own hash.
    pub fn write(&self, path: &Path) -> Result<()> {
        let body = self.render_body();
        let mut text = format!(
            "# resolved configuration, defaults expanded\n# config_hash={}\n",
            bytes_hash(body.as_bytes())
        );
        for (k, v) in &self.notes {
            text.push_str(&format!("# {k}={v}\n"));
        }
        text.push_str(&body);
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }
}
