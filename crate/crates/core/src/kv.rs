//! Flat `key = value` text files.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored and
//! nested keys are written with dots (`lsa.groups = 4`).

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    entries: BTreeMap<String, String>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {raw:?}", lineno + 1)))?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Config(format!("line {}: invalid key {key:?}", lineno + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(KvFile { entries })
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Typed lookup; absent keys yield `None`, unparsable values an error.
    pub fn get<V: FromStr>(&self, key: &str) -> Result<Option<V>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse {v:?}"))),
        }
    }

    pub fn get_or<V: FromStr>(&self, key: &str, default: V) -> Result<V> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list<V: FromStr>(&self, key: &str) -> Result<Option<Vec<V>>> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse list item {s:?}"))))
            .collect::<Result<Vec<V>>>()
            .map(Some)
    }

    /// `lo, hi` pair.
    pub fn range<V: FromStr + Copy>(&self, key: &str) -> Result<Option<(V, V)>> {
        match self.list::<V>(key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 => Ok(Some((v[0], v[1]))),
            Some(_) => Err(Error::Config(format!("`{key}`: expected `lo, hi`"))),
        }
    }

    /// Fails on any key outside `known`, catching typos in config files.
    pub fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        match self.keys().find(|k| !known.contains(k)) {
            Some(k) => Err(Error::Config(format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_dotted_keys() {
        let kv = KvFile::parse("# model\nlsa.groups = 4   # four groups\n\nlr=0.001\nkernels = 1, 3,5\n").unwrap();
        assert_eq!(kv.get::<usize>("lsa.groups").unwrap(), Some(4));
        assert_eq!(kv.get::<f64>("lr").unwrap(), Some(0.001));
        assert_eq!(kv.list::<usize>("kernels").unwrap(), Some(vec![1, 3, 5]));
        assert_eq!(kv.get::<usize>("missing").unwrap(), None);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(KvFile::parse("just words").is_err());
        assert!(KvFile::parse("a = 1\na = 2").is_err());
        assert!(KvFile::parse("a b = 1").is_err());
        let kv = KvFile::parse("n = four").unwrap();
        assert!(kv.get::<usize>("n").is_err());
    }
}
