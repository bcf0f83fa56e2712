//! Flat `key=value` run configuration: model settings plus command options.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use catstream_core::config::{parse_key_values, ConfigError};
use catstream_core::TrainConfig;

use crate::CliError;

/// One command's effective settings. Command options are declared up front
/// with their defaults; model keys go to the embedded [`TrainConfig`].
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: &'static str,
    pub train: Option<TrainConfig>,
    options: BTreeMap<&'static str, Option<String>>,
}

impl RunConfig {
    pub fn new(command: &'static str, options: &[(&'static str, Option<&str>)], train: Option<TrainConfig>) -> Self {
        RunConfig {
            command,
            train,
            options: options.iter().map(|(k, v)| (*k, v.map(str::to_string))).collect(),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if let Some(slot) = self.options.get_mut(key) {
            *slot = Some(value.to_string());
            return Ok(());
        }
        match &mut self.train {
            Some(t) => t.set(key, value),
            None => Err(ConfigError::UnknownKey(key.to_string())),
        }
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        for (k, v) in parse_key_values(&text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Applies `--set key=value` overrides.
    pub fn apply_overrides(&mut self, pairs: &[String]) -> Result<(), ConfigError> {
        for (n, pair) in pairs.iter().enumerate() {
            let (k, v) = pair.split_once('=').ok_or(ConfigError::Syntax { line: n + 1 })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.options.get(key).and_then(|v| v.as_deref())
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::BadValue {
            key: key.to_string(),
            value: String::new(),
            reason: "a value is required".into(),
        })
    }

    pub fn path(&self, key: &str) -> Result<PathBuf, ConfigError> {
        self.require(key).map(PathBuf::from)
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::BadValue {
                    key: key.to_string(),
                    value: v.to_string(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    pub fn model(&self) -> &TrainConfig {
        self.train.as_ref().expect("command carries a model configuration")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# catstream {}\n", self.command);
        for (k, v) in &self.options {
            if let Some(v) = v {
                out.push_str(&format!("{k}={v}\n"));
            }
        }
        if let Some(t) = &self.train {
            out.push_str(&t.to_text());
        }
        out
    }

    /// Writes the effective configuration as `config.txt` in `dir`.
    pub fn echo(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join("config.txt");
        fs::write(&path, self.to_text()).map_err(|e| CliError::io(&path, e))
    }
}

/// Comma-separated list.
pub fn parse_list<T: std::str::FromStr>(key: &str, text: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>().map_err(|e| ConfigError::BadValue {
                key: key.to_string(),
                value: s.to_string(),
                reason: e.to_string(),
            })
        })
        .collect()
}
