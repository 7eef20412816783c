//! Flat key=value config files with [section] headers, chosen over
//! positional flags so experiment records stay reproducible.

use std::collections::HashMap;
use std::path::Path;

use sok_core::{Error, Result};

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: HashMap<(String, String), String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = HashMap::new();
        let mut section = String::new();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(Error::Format(format!(
                        "line {}: malformed section header '{raw}'",
                        line_no + 1
                    )));
                }
                section = line[1..line.len() - 1].trim().to_ascii_lowercase();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Format(format!(
                    "line {}: expected key = value, got '{raw}'",
                    line_no + 1
                )));
            };
            values.insert(
                (section.clone(), key.trim().to_ascii_lowercase()),
                value.trim().to_string(),
            );
        }
        Ok(ConfigFile { values })
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.values
            .get(&(section.to_ascii_lowercase(), key.to_ascii_lowercase()))
            .map(|s| s.as_str())
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key).ok_or_else(|| {
            Error::Format(format!("config is missing [{section}] {key}"))
        })
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::Format(format!("config [{section}] {key}: cannot parse '{raw}'"))
            }),
        }
    }

    pub fn get_or<T: std::str::FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.get_parsed(section, key)?.unwrap_or(default))
    }

    pub fn get_list<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|v| {
                    v.trim().parse::<T>().map_err(|_| {
                        Error::Format(format!("config [{section}] {key}: cannot parse '{v}'"))
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn get_bool(&self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.get(section, key) {
            None => Ok(default),
            Some(raw) => match raw.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" | "on" => Ok(true),
                "false" | "0" | "no" | "off" => Ok(false),
                other => Err(Error::Format(format!(
                    "config [{section}] {key}: expected a boolean, got '{other}'"
                ))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_keys_and_comments() {
        let cfg = ConfigFile::parse(
            "# experiment\n[data]\ndataset = heat.fnod\n\n[train]\nepochs = 300 # long\nlr=3e-3\n",
        )
        .unwrap();
        assert_eq!(cfg.require("data", "dataset").unwrap(), "heat.fnod");
        assert_eq!(cfg.get_or::<usize>("train", "epochs", 0).unwrap(), 300);
        assert_eq!(cfg.get_or::<f64>("train", "lr", 0.0).unwrap(), 3e-3);
        assert!(cfg.get("train", "missing").is_none());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(ConfigFile::parse("[broken\n").is_err());
        assert!(ConfigFile::parse("key_without_value\n").is_err());
    }

    #[test]
    fn lists_and_bools() {
        let cfg = ConfigFile::parse("[model]\nscaling = 1, 8, 0.25\nifno = true\n").unwrap();
        assert_eq!(
            cfg.get_list::<f64>("model", "scaling").unwrap().unwrap(),
            vec![1.0, 8.0, 0.25]
        );
        assert!(cfg.get_bool("model", "ifno", false).unwrap());
    }
}
