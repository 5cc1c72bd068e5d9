//! `key=value` configuration files mirroring the long command line options.
//! Values from the file fill options that were not given on the command
//! line; explicit flags always win. Keys the active subcommand does not
//! recognize are usage errors.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (lno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{}:{}: expected key=value, got `{line}`",
                    path.display(),
                    lno + 1
                )));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Usage(format!(
                    "{}:{}: empty key",
                    path.display(),
                    lno + 1
                )));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!(
                    "{}: duplicate key `{key}`",
                    path.display()
                )));
            }
        }
        Ok(Self { values })
    }

    /// Consume `key`; parse it into `slot` unless the flag was already set.
    pub fn fill<T>(&mut self, key: &str, slot: &mut Option<T>) -> Result<(), CliError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if let Some(raw) = self.values.remove(key) {
            if slot.is_none() {
                let parsed = raw.parse::<T>().map_err(|e| {
                    CliError::Usage(format!("config key `{key}`: cannot parse `{raw}`: {e}"))
                })?;
                *slot = Some(parsed);
            }
        }
        Ok(())
    }

    /// Consume `key` for a presence flag; `key=true` turns it on.
    pub fn fill_flag(&mut self, key: &str, slot: &mut bool) -> Result<(), CliError> {
        if let Some(raw) = self.values.remove(key) {
            let parsed: bool = raw.parse().map_err(|e| {
                CliError::Usage(format!("config key `{key}`: cannot parse `{raw}`: {e}"))
            })?;
            *slot = *slot || parsed;
        }
        Ok(())
    }

    /// After the active subcommand consumed its keys, anything left is a typo
    /// or a flag of a different subcommand.
    pub fn ensure_consumed(&self) -> Result<(), CliError> {
        match self.values.keys().next() {
            None => Ok(()),
            Some(key) => Err(CliError::Usage(format!(
                "config contains key `{key}`, which this command does not accept"
            ))),
        }
    }
}
