//! Flat `key = value` text format shared by run configs and measure files.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored. List
//! values use `[a, b, ...]`; pair lists use `[(a, b), (c, d)]`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got {raw:?}", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Config(format!("line {}: bad key {key:?}", lineno + 1)));
            }
            if map.entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
        }
        Ok(map)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }

    /// Copies every entry of `other` over this map.
    pub fn overlay(&mut self, other: &KvMap) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}"))),
        }
    }

    pub fn parsed_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| parse_list(v).map_err(|e| Error::Config(format!("{key}: {e}"))))
            .transpose()
    }

    pub fn pair_list(&self, key: &str) -> Result<Option<Vec<(f64, f64)>>> {
        self.get(key)
            .map(|v| parse_pairs(v).map_err(|e| Error::Config(format!("{key}: {e}"))))
            .transpose()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

fn strip_brackets<'a>(s: &'a str, open: char, close: char) -> std::result::Result<&'a str, String> {
    let s = s.trim();
    s.strip_prefix(open)
        .and_then(|s| s.strip_suffix(close))
        .ok_or_else(|| format!("expected {open}...{close}, got {s:?}"))
}

fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("not a finite number: {s:?}"))
}

/// Parses `[a, b, c]`; a bare scalar is accepted as a one-element list.
pub fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    let s = s.trim();
    if !s.starts_with('[') {
        return Ok(vec![parse_number(s)?]);
    }
    let inner = strip_brackets(s, '[', ']')?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(parse_number).collect()
}

/// Parses `[(a, b), (c, d)]`.
pub fn parse_pairs(s: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
    let inner = strip_brackets(s, '[', ']')?.trim();
    let mut out = Vec::new();
    let mut rest = inner;
    while !rest.is_empty() {
        let start = rest.find('(').ok_or_else(|| format!("expected '(' in {rest:?}"))?;
        if !rest[..start].trim().trim_start_matches(',').trim().is_empty() {
            return Err(format!("unexpected text {:?}", &rest[..start]));
        }
        let end = rest.find(')').ok_or_else(|| format!("unclosed '(' in {rest:?}"))?;
        let (a, b) = rest[start + 1..end]
            .split_once(',')
            .ok_or_else(|| format!("pair needs two values: {:?}", &rest[start..=end]))?;
        out.push((parse_number(a)?, parse_number(b)?));
        rest = rest[end + 1..].trim();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim();
    }
    Ok(out)
}

pub fn format_list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    format!("[{}]", items.join(", "))
}

pub fn format_pairs(values: &[(f64, f64)]) -> String {
    let items: Vec<String> = values.iter().map(|(a, b)| format!("({a:?}, {b:?})")).collect();
    format!("[{}]", items.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries_and_comments() {
        let map = KvMap::parse("# header\nseed = 42\n\ngamma = 1.5 # trailing\n").unwrap();
        assert_eq!(map.parsed::<u64>("seed").unwrap(), Some(42));
        assert_eq!(map.parsed::<f64>("gamma").unwrap(), Some(1.5));
        assert_eq!(map.parsed::<f64>("missing").unwrap(), None);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(KvMap::parse("seed 42").is_err());
        assert!(KvMap::parse("a = 1\na = 2").is_err());
        assert!(KvMap::parse("bad key = 1").is_err());
    }

    #[test]
    fn lists_and_pairs() {
        assert_eq!(parse_list("[-0.1, 0.1]").unwrap(), vec![-0.1, 0.1]);
        assert_eq!(parse_list("[]").unwrap(), Vec::<f64>::new());
        assert_eq!(parse_list("3").unwrap(), vec![3.0]);
        assert_eq!(parse_pairs("[(0, 1.0), (2.5,3)]").unwrap(), vec![(0.0, 1.0), (2.5, 3.0)]);
        assert_eq!(parse_pairs("[]").unwrap(), vec![]);
        assert!(parse_pairs("[(0 1)]").is_err());
        assert!(parse_list("[1, nan]").is_err());
    }
}
