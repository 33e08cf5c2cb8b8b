//! Run configuration files.
//!
//! ```text
//! # shared by every run below
//! seed = 7
//! fidelity = desk
//!
//! [table-one]
//! id = 1
//!
//! [table-three]
//! id = 3
//! reps = 20
//! ```
//!
//! Keys before the first `[section]` apply to every run. Each section is one
//! run; a file without sections is a single run.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Key/value settings for one run, with the line each value came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSpec {
    pub name: Option<String>,
    path: String,
    entries: BTreeMap<String, Entry>,
}

impl RunSpec {
    pub fn empty() -> Self {
        RunSpec {
            name: None,
            path: "<command line>".into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Override from the command line.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line: 0,
            },
        );
    }

    fn parse_error(&self, line: usize, message: String) -> Error {
        if line == 0 {
            return Error::usage(message);
        }
        Error::Parse {
            path: self.path.clone(),
            line,
            message,
        }
    }

    /// Fail on the first key not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for (key, entry) in &self.entries {
            if !allowed.contains(&key.as_str()) {
                return Err(self.parse_error(entry.line, format!("unknown key `{key}`")));
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    /// Typed lookup; a value that does not parse is reported at its line.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| self.parse_error(e.line, format!("bad value `{}` for `{key}`: {err}", e.value))),
        }
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(|item| {
                    item.trim().parse::<T>().map_err(|err| {
                        self.parse_error(e.line, format!("bad list item `{}` for `{key}`: {err}", item.trim()))
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub runs: Vec<RunSpec>,
}

pub fn parse_config(text: &str, path: &str) -> Result<ConfigFile> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_string(),
        line,
        message,
    };
    let mut global = RunSpec {
        name: None,
        path: path.to_string(),
        entries: BTreeMap::new(),
    };
    let mut sections: Vec<RunSpec> = Vec::new();
    // keys set explicitly in the current block
    let mut seen: HashSet<String> = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line, format!("unterminated section header `{content}`")))?
                .trim();
            if name.is_empty() {
                return Err(err(line, "empty section name".into()));
            }
            if sections.iter().any(|s| s.name.as_deref() == Some(name)) {
                return Err(err(line, format!("duplicate section `{name}`")));
            }
            sections.push(RunSpec {
                name: Some(name.to_string()),
                path: path.to_string(),
                entries: global.entries.clone(),
            });
            seen.clear();
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        if key.is_empty() {
            return Err(err(line, "missing key".into()));
        }
        if value.is_empty() {
            return Err(err(line, format!("missing value for `{key}`")));
        }
        let target = sections.last_mut().unwrap_or(&mut global);
        if !seen.insert(key.clone()) {
            return Err(err(line, format!("duplicate key `{key}`")));
        }
        target.entries.insert(
            key,
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }

    let runs = if sections.is_empty() { vec![global] } else { sections };
    Ok(ConfigFile { runs })
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, &path.display().to_string())
}
