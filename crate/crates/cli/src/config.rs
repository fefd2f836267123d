//! Sectioned key-value configuration. The text form is INI-like; JSON with
//! the same two-level layout is accepted as well.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::Deserialize;

use crate::error::CliError;

pub const SECTIONS: [&str; 8] = [
    "problem",
    "flux",
    "noise",
    "oscillation",
    "grid",
    "scheme",
    "sweep",
    "output",
];

const KEYS: [(&str, &[&str]); 8] = [
    (
        "problem",
        &[
            "variant",
            "T",
            "eps",
            "kappa0",
            "initial",
            "amplitude",
            "offset",
            "phase",
            "alpha",
        ],
    ),
    ("flux", &["f1", "f2", "delta0", "range"]),
    ("noise", &["model"]),
    (
        "oscillation",
        &[
            "potential",
            "amplitude",
            "period",
            "velocity",
            "speed",
            "shear_mean",
            "shear_amplitude",
        ],
    ),
    ("grid", &["dim", "L", "n", "boundary", "lower", "upper"]),
    (
        "scheme",
        &["flux", "cfl", "viscosity", "well_balanced", "min_level"],
    ),
    (
        "sweep",
        &[
            "epsilons",
            "seeds",
            "paths",
            "path_level",
            "cells_per_eps",
            "min_cells",
            "times",
            "y_bins",
            "xi_bins",
            "nodes",
            "alphas",
            "factors",
            "resolutions",
            "weight",
            "probes",
            "p_range",
            "p_nodes",
            "v_range",
            "v_points",
            "xi_step",
        ],
    ),
    ("output", &["fields"]),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseIssue {
    /// 1-based; 0 when no line is known.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            f.write_str(&self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

fn known_key(section: &str, key: &str) -> bool {
    KEYS.iter()
        .any(|(s, keys)| *s == section && keys.contains(&key))
}

impl Config {
    pub fn parse_ini(text: &str) -> Result<Self, CliError> {
        let mut cfg = Config::default();
        let mut issues = Vec::new();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(name) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                let name = name.trim();
                if SECTIONS.contains(&name) {
                    section = Some(name.to_string());
                } else {
                    issues.push(ParseIssue {
                        line,
                        message: format!(
                            "unknown section [{name}] (expected one of {})",
                            SECTIONS.join(", ")
                        ),
                    });
                    section = None;
                }
                continue;
            }
            let Some((key, value)) = s.split_once('=') else {
                issues.push(ParseIssue {
                    line,
                    message: format!("expected '[section]' or 'key = value', found '{s}'"),
                });
                continue;
            };
            let key = key.trim();
            let value = unquote(value.trim());
            let Some(sec) = &section else {
                issues.push(ParseIssue {
                    line,
                    message: format!("key '{key}' outside a known section"),
                });
                continue;
            };
            if let Err(issue) = cfg.insert(sec, key, value, line) {
                issues.push(issue);
            }
        }
        if issues.is_empty() {
            Ok(cfg)
        } else {
            Err(CliError::Parse(issues))
        }
    }

    pub fn parse_json(text: &str) -> Result<Self, CliError> {
        let doc: Strict<Strict<serde_json::Value>> = serde_json::from_str(text).map_err(|e| {
            CliError::Parse(vec![ParseIssue {
                line: e.line(),
                message: e.to_string(),
            }])
        })?;
        let mut cfg = Config::default();
        let mut issues = Vec::new();
        for (section, entries) in doc.0 {
            if !SECTIONS.contains(&section.as_str()) {
                issues.push(ParseIssue {
                    line: 0,
                    message: format!("unknown section \"{section}\""),
                });
                continue;
            }
            for (key, value) in entries.0 {
                match json_scalar(&value) {
                    Some(v) => {
                        if let Err(issue) = cfg.insert(&section, &key, v, 0) {
                            issues.push(issue);
                        }
                    }
                    None => issues.push(ParseIssue {
                        line: 0,
                        message: format!(
                            "{section}.{key}: expected a string, number, bool or list of numbers"
                        ),
                    }),
                }
            }
        }
        if issues.is_empty() {
            Ok(cfg)
        } else {
            Err(CliError::Parse(issues))
        }
    }

    /// Reads a file; `.json` files are parsed as JSON, anything else as text.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            Self::parse_json(&text)
        } else {
            Self::parse_ini(&text)
        }
    }

    fn insert(
        &mut self,
        section: &str,
        key: &str,
        value: String,
        line: usize,
    ) -> Result<(), ParseIssue> {
        if !known_key(section, key) {
            return Err(ParseIssue {
                line,
                message: format!("unknown key '{key}' in [{section}]"),
            });
        }
        let entries = self.sections.entry(section.to_string()).or_default();
        if let Some(prev) = entries.get(key) {
            let message = if line > 0 {
                format!(
                    "duplicate key '{key}' in [{section}] (lines {} and {line})",
                    prev.line
                )
            } else {
                format!("duplicate key '{key}' in [{section}]")
            };
            return Err(ParseIssue { line, message });
        }
        entries.insert(key.to_string(), Entry { value, line });
        Ok(())
    }

    /// Sets a key, replacing any previous value.
    pub fn set(
        &mut self,
        section: &str,
        key: &str,
        value: impl Into<String>,
    ) -> Result<(), CliError> {
        if !known_key(section, key) {
            return Err(CliError::Validation(format!("unknown key {section}.{key}")));
        }
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(
                key.to_string(),
                Entry {
                    value: value.into(),
                    line: 0,
                },
            );
        Ok(())
    }

    /// Copies every key of `other` over this configuration.
    pub fn overlay(&mut self, other: &Config) {
        for (s, entries) in &other.sections {
            let mine = self.sections.entry(s.clone()).or_default();
            for (k, e) in entries {
                mine.insert(k.clone(), e.clone());
            }
        }
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)?
            .get(key)
            .map(|e| e.value.as_str())
    }

    fn located(&self, section: &str, key: &str) -> String {
        match self.sections.get(section).and_then(|s| s.get(key)) {
            Some(e) if e.line > 0 => format!("{section}.{key} (line {})", e.line),
            _ => format!("{section}.{key}"),
        }
    }

    fn invalid(&self, section: &str, key: &str, what: &str) -> CliError {
        CliError::Validation(format!(
            "{}: expected {what}, got '{}'",
            self.located(section, key),
            self.get(section, key).unwrap_or("")
        ))
    }

    pub fn string<'a>(&'a self, section: &str, key: &str, default: &'a str) -> &'a str {
        self.get(section, key).unwrap_or(default)
    }

    pub fn opt_f64(&self, section: &str, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => parse_real(v)
                .map(Some)
                .ok_or_else(|| self.invalid(section, key, "a number")),
        }
    }

    pub fn f64(&self, section: &str, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.opt_f64(section, key)?.unwrap_or(default))
    }

    pub fn usize(&self, section: &str, key: &str, default: usize) -> Result<usize, CliError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| self.invalid(section, key, "a nonnegative integer")),
        }
    }

    pub fn bool(&self, section: &str, key: &str, default: bool) -> Result<bool, CliError> {
        match self.get(section, key) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(_) => Err(self.invalid(section, key, "true or false")),
        }
    }

    pub fn f64_list(
        &self,
        section: &str,
        key: &str,
        default: &[f64],
    ) -> Result<Vec<f64>, CliError> {
        match self.get(section, key) {
            None => Ok(default.to_vec()),
            Some(v) => split_list(v)
                .map(parse_real)
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| self.invalid(section, key, "a comma-separated list of numbers")),
        }
    }

    pub fn u64_list(
        &self,
        section: &str,
        key: &str,
        default: &[u64],
    ) -> Result<Vec<u64>, CliError> {
        match self.get(section, key) {
            None => Ok(default.to_vec()),
            Some(v) => split_list(v)
                .map(|s| s.parse().ok())
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| self.invalid(section, key, "a comma-separated list of integers")),
        }
    }

    pub fn pair(
        &self,
        section: &str,
        key: &str,
        default: (f64, f64),
    ) -> Result<(f64, f64), CliError> {
        let v = self.f64_list(section, key, &[default.0, default.1])?;
        match v[..] {
            [a, b] if a < b => Ok((a, b)),
            _ => Err(self.invalid(section, key, "an increasing pair 'lo, hi'")),
        }
    }

    /// Sorted text form: sections in schema order, keys alphabetical, no
    /// comments. Equal configurations have equal canonical text.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for s in SECTIONS {
            let Some(entries) = self.sections.get(s) else {
                continue;
            };
            if entries.is_empty() {
                continue;
            }
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("[{s}]\n"));
            for (k, e) in entries {
                out.push_str(&format!("{k} = {}\n", e.value));
            }
        }
        out
    }
}

fn unquote(s: &str) -> String {
    s.strip_prefix('"')
        .and_then(|r| r.strip_suffix('"'))
        .unwrap_or(s)
        .to_string()
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Accepts plain numbers and simple fractions such as `1/16`.
fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
        None => s.parse::<f64>().ok()?,
    };
    v.is_finite().then_some(v)
}

fn json_scalar(v: &serde_json::Value) -> Option<String> {
    use serde_json::Value;
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Array(items) => items
            .iter()
            .map(|i| match i {
                Value::Number(n) => Some(n.to_string()),
                Value::String(s) => Some(s.clone()),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(|v| v.join(", ")),
        _ => None,
    }
}

/// JSON object that rejects repeated keys instead of keeping the last one.
struct Strict<V>(Vec<(String, V)>);

impl<'de, V: Deserialize<'de>> Deserialize<'de> for Strict<V> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V_<V>(std::marker::PhantomData<V>);

        impl<'de, V: Deserialize<'de>> Visitor<'de> for V_<V> {
            type Value = Strict<V>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut out: Vec<(String, V)> = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, V>()? {
                    if out.iter().any(|(seen, _)| *seen == k) {
                        return Err(de::Error::custom(format!("duplicate key \"{k}\"")));
                    }
                    out.push((k, v));
                }
                Ok(Strict(out))
            }
        }

        d.deserialize_map(V_(std::marker::PhantomData))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_key_reports_both_lines() {
        let text = "[problem]\nT = 1\n\n# again\nT = 2\n";
        match Config::parse_ini(text) {
            Err(CliError::Parse(issues)) => {
                assert_eq!(issues.len(), 1);
                assert_eq!(issues[0].line, 5);
                assert!(issues[0].message.contains("lines 2 and 5"), "{}", issues[0]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_are_collected() {
        let text = "T = 1\n[nope]\n[grid]\nn 12\nwidth = 3\n";
        let Err(CliError::Parse(issues)) = Config::parse_ini(text) else {
            panic!()
        };
        let lines: Vec<usize> = issues.iter().map(|i| i.line).collect();
        assert_eq!(lines, vec![1, 2, 4, 5]);
    }

    #[test]
    fn json_matches_text() {
        let ini = Config::parse_ini(
            "[problem]\neps = 0.125\nvariant = \"stiff-source\"\n[sweep]\nseeds = 1, 2\n",
        )
        .unwrap();
        let json = Config::parse_json(
            r#"{"sweep": {"seeds": [1, 2]}, "problem": {"variant": "stiff-source", "eps": 0.125}}"#,
        )
        .unwrap();
        assert_eq!(ini.canonical(), json.canonical());
        let dup = Config::parse_json(r#"{"problem": {"eps": 1, "eps": 2}}"#);
        assert!(
            matches!(dup, Err(CliError::Parse(ref i)) if i[0].message.contains("duplicate key"))
        );
    }

    #[test]
    fn typed_getters() {
        let c = Config::parse_ini("[sweep]\nepsilons = 1/8, 0.0625\nseeds = 3\n[grid]\nn = x\n")
            .unwrap();
        assert_eq!(
            c.f64_list("sweep", "epsilons", &[]).unwrap(),
            vec![0.125, 0.0625]
        );
        assert_eq!(c.u64_list("sweep", "seeds", &[]).unwrap(), vec![3]);
        let err = c.usize("grid", "n", 1).unwrap_err().to_string();
        assert!(err.contains("grid.n (line 5)"), "{err}");
        assert_eq!(c.f64("problem", "T", 0.5).unwrap(), 0.5);
    }

    #[test]
    fn overlay_and_canonical() {
        let mut a = Config::parse_ini("[grid]\nn = 64\n[problem]\nT = 1\n").unwrap();
        let b = Config::parse_ini("[grid]\nn = 128\n").unwrap();
        a.overlay(&b);
        assert_eq!(a.canonical(), "[problem]\nT = 1\n\n[grid]\nn = 128\n");
        assert_eq!(
            Config::parse_ini(&a.canonical()).unwrap().canonical(),
            a.canonical()
        );
    }
}
