//! `key = value` settings.
//!
//! Layers are merged in order (environment default seed, config file, flags)
//! and the last writer wins. Commands read typed values through
//! [`Settings::value`], which records every default it falls back to, so the
//! settings end up fully resolved.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{LabError, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LabError::usage(format!("config line {}: expected key = value", i + 1)))?;
            if k.trim().is_empty() {
                return Err(LabError::usage(format!("config line {}: empty key", i + 1)));
            }
            s.set(k, v.trim());
        }
        Ok(s)
    }

    pub fn from_map(map: BTreeMap<String, String>) -> Self {
        let mut s = Self::new();
        for (k, v) in map {
            s.set(&k, &v);
        }
        s
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(normalize(key), value.into());
    }

    /// Overlays `other`; its values win.
    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(&normalize(key))
    }

    pub fn map(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.values.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(LabError::usage(format!(
                "unknown setting `{k}`; expected one of: {}",
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    /// Typed value, or `default` (which is then stored).
    pub fn value<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.get(key) {
            Some(_) => self.require(key),
            None => {
                self.set(key, default.to_string());
                Ok(default)
            }
        }
    }

    pub fn require<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self
            .get(key)
            .ok_or_else(|| LabError::usage(format!("missing required --{}", normalize(key))))?;
        raw.parse()
            .map_err(|e| LabError::usage(format!("--{} {raw:?}: {e}", normalize(key))))
    }

    /// Comma-separated list, or `default` (which is then stored).
    pub fn list<T>(&mut self, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T: FromStr + Display + Clone,
        T::Err: Display,
    {
        let Some(raw) = self.get(key) else {
            let joined: Vec<String> = default.iter().map(T::to_string).collect();
            self.set(key, joined.join(","));
            return Ok(default.to_vec());
        };
        let items = raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|e| LabError::usage(format!("--{} item {s:?}: {e}", normalize(key))))
            })
            .collect::<Result<Vec<T>>>()?;
        if items.is_empty() {
            return Err(LabError::usage(format!("--{} is empty", normalize(key))));
        }
        Ok(items)
    }
}
