use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Flat `key = value` configuration. Blank lines and `#` comments are
/// ignored; keys use the long flag names, e.g. `gamma-r = 0.971`.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("config line {}: expected key=value", i + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::Validation(format!("config line {}: empty key", i + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// Resolves parameters as flag, else config file, else default, and
/// remembers every effective value for the report hash.
pub struct Params {
    file: BTreeMap<String, String>,
    used: RefCell<BTreeMap<String, String>>,
    seen: RefCell<BTreeSet<String>>,
}

impl Params {
    pub fn new(file: BTreeMap<String, String>) -> Self {
        Params { file, used: RefCell::new(BTreeMap::new()), seen: RefCell::new(BTreeSet::new()) }
    }

    fn file_value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.file.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| Error::Validation(format!("config key `{key}`: cannot parse `{s}`"))),
        }
    }

    fn note<T: Display>(&self, key: &str, v: &T) {
        self.used.borrow_mut().insert(key.to_string(), v.to_string());
    }

    pub fn opt<T: FromStr + Display>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &v {
            self.note(key, v);
        }
        Ok(v)
    }

    pub fn get<T: FromStr + Display>(&self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let v = self.opt(key, flag)?.unwrap_or(default);
        self.note(key, &v);
        Ok(v)
    }

    pub fn require<T: FromStr + Display>(&self, key: &str, flag: Option<T>) -> Result<T> {
        self.opt(key, flag)?.ok_or_else(|| Error::Validation(format!("missing required parameter --{key}")))
    }

    pub fn flag(&self, key: &str, flag: bool) -> Result<bool> {
        let v = flag || self.file_value::<bool>(key)?.unwrap_or(false);
        self.note(key, &v);
        Ok(v)
    }

    /// Output-only setting: resolved like [`Params::opt`] but left out of
    /// the hash.
    pub fn setting<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        self.seen.borrow_mut().insert(key.to_string());
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.file_value(key),
        }
    }

    /// Comma-separated list.
    pub fn list<T: FromStr + Display>(&self, key: &str, flag: Option<String>) -> Result<Option<Vec<T>>> {
        let Some(raw) = self.opt::<String>(key, flag)? else {
            return Ok(None);
        };
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Validation(format!("--{key}: cannot parse `{}`", s.trim())))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Config keys that no parameter lookup touched.
    pub fn unused(&self) -> Vec<String> {
        let (used, seen) = (self.used.borrow(), self.seen.borrow());
        self.file.keys().filter(|k| !used.contains_key(*k) && !seen.contains(*k)).cloned().collect()
    }

    /// SHA-256 over `command` and the sorted effective parameters.
    pub fn hash(&self, command: &str) -> String {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        for (k, v) in self.used.borrow().iter() {
            h.update(format!("\n{k}={v}").as_bytes());
        }
        hex::encode(h.finalize())
    }
}
