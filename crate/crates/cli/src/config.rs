//! JSON run configuration: every `ClawConfig` field plus the null choice.

use std::path::{Path, PathBuf};

use claw_core::estimators::{NullModel, StandardNormal, TabulatedNull};
use claw_core::semisup::SemisupOptions;
use claw_core::ClawConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::input::read_null_table;

pub const SEED_ENV: &str = "CLAW_SEED";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullSpec {
    #[default]
    StandardNormal,
    /// CSV with columns `t`, `cdf`, `pdf`; relative paths resolve against
    /// the config file's directory.
    Table(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub claw: ClawConfig,
    pub f0: NullSpec,
    pub train_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            claw: ClawConfig::default(),
            f0: NullSpec::default(),
            train_fraction: SemisupOptions::default().train_fraction,
        }
    }
}

fn config_error(path: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn field<T: for<'de> Deserialize<'de>>(value: Value, name: &str) -> CliResult<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." {
            name.to_string()
        } else {
            format!("{name}.{inner}")
        };
        config_error(path, e.into_inner().to_string())
    })
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| config_error("<root>", e.to_string()))?;
        let Value::Object(mut map) = value else {
            return Err(config_error("<root>", "expected a JSON object"));
        };
        let mut cfg = Self::default();
        if let Some(v) = map.remove("f0") {
            cfg.f0 = field(v, "f0")?;
        }
        if let Some(v) = map.remove("train_fraction") {
            cfg.train_fraction = field(v, "train_fraction")?;
        }
        cfg.claw = serde_path_to_error::deserialize(Value::Object(map))
            .map_err(|e| config_error(e.path().to_string(), e.into_inner().to_string()))?;
        if let NullSpec::Table(p) = &mut cfg.f0 {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.claw.validate().map_err(|e| match e {
            claw_core::ClawError::InvalidConfig { field, reason } => config_error(field, reason),
            other => other.into(),
        })?;
        Ok(cfg)
    }

    pub fn null_model(&self) -> CliResult<Box<dyn NullModel>> {
        Ok(match &self.f0 {
            NullSpec::StandardNormal => Box::new(StandardNormal),
            NullSpec::Table(p) => Box::new(TabulatedNull::new(read_null_table(p)?)?),
        })
    }

    pub fn semisup_options(&self) -> SemisupOptions {
        SemisupOptions {
            train_fraction: self.train_fraction,
        }
    }
}

/// Flag, then `CLAW_SEED`, then the config value (itself defaulting to 0).
pub fn resolve_seed(flag: Option<u64>, config: u64) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| config_error(SEED_ENV, format!("`{v}` is not an unsigned integer"))),
        Err(_) => Ok(config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use claw_core::model::WeightSpec;
    use std::io::Write;

    fn load(json: &str) -> CliResult<RunConfig> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(json.as_bytes()).unwrap();
        RunConfig::load(Some(f.path()))
    }

    #[test]
    fn defaults_and_overrides() {
        let cfg = load(r#"{"alpha": 0.1, "weights": {"kind": "gaussian", "scale": 2.0}}"#).unwrap();
        assert_eq!(cfg.claw.alpha, 0.1);
        assert_eq!(cfg.claw.weights, WeightSpec::Gaussian { scale: 2.0 });
        assert_eq!(cfg.f0, NullSpec::StandardNormal);
        assert_eq!(load("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn errors_carry_field_path() {
        match load(r#"{"weights": {"kind": "gaussian", "scale": "x"}}"#) {
            Err(CliError::Config { path, .. }) => assert!(path.starts_with("weights")),
            other => panic!("{other:?}"),
        }
        match load(r#"{"bandwidth": {"kind": "fixed", "h": -1.0}}"#) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "bandwidth.h"),
            other => panic!("{other:?}"),
        }
        match load(r#"{"alpha": 2.0}"#) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "alpha"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            load(r#"{"alpah": 0.1}"#),
            Err(CliError::Config { .. })
        ));
    }

    #[test]
    fn table_path_is_relative_to_config() {
        let cfg = load(r#"{"f0": {"table": "null.csv"}}"#).unwrap();
        let NullSpec::Table(p) = cfg.f0 else { panic!() };
        assert!(p.is_absolute() && p.ends_with("null.csv"));
    }
}
