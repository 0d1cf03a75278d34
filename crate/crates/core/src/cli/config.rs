//! Experiment configuration: one JSON document, optionally overridden from
//! the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("config is not valid JSON: {0}")]
    Syntax(String),
    #[error("config key `{key}`: {message}")]
    Key { key: String, message: String },
    #[error("override `{0}` must have the form key=value")]
    Override(String),
}

impl ConfigError {
    fn key(key: &str, message: impl Into<String>) -> Self {
        Self::Key {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub epsilon: f64,
    pub c_s: f64,
    pub alpha: f64,
    /// Angular mode of the modulation.
    pub m: u32,
    pub n_k: usize,
    pub n_chi: usize,
    /// Relative padding of the chart range around the support annulus.
    pub chart_margin: f64,
    pub grid_points: usize,
    pub velocity_nodes: usize,
    pub t_max: f64,
    pub samples_per_decade: usize,
    /// Uniform samples per orbital period in decay runs.
    pub samples_per_period: usize,
    pub fit_window: (f64, f64),
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Time step of the centred difference of `φ`.
    pub dt_fd: f64,
    /// Tolerance of the adaptive integrator used for cross-validation.
    pub flow_tolerance: f64,
    /// Explicit snapshot times for `evolve`; a log schedule when absent.
    pub evolve_times: Option<Vec<f64>>,
    /// Also run the harmonic control in `decay`.
    pub control: bool,
    /// Side of the `(Q, K)` sample used by the solver cross-check.
    pub validation_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            c_s: 0.5,
            alpha: 0.5,
            m: 1,
            n_k: 64,
            n_chi: 256,
            chart_margin: 0.05,
            grid_points: 201,
            velocity_nodes: 128,
            t_max: 200.0,
            samples_per_decade: 12,
            samples_per_period: 24,
            fit_window: (20.0, 200.0),
            output_dir: PathBuf::from("out"),
            seed: 42,
            dt_fd: 1e-3,
            flow_tolerance: 1e-10,
            evolve_times: None,
            control: false,
            validation_samples: 20,
        }
    }
}

impl ExperimentConfig {
    /// Parses a JSON document and applies `key=value` overrides on top of it.
    ///
    /// Values are read as JSON when they parse, otherwise as strings.
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut doc: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let Value::Object(map) = &mut doc else {
            return Err(ConfigError::Syntax("top level must be an object".into()));
        };
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| ConfigError::Override(item.clone()))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            map.insert(key.trim().to_string(), value);
        }
        let config: Self = serde_path_to_error::deserialize(doc).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner().to_string();
            let key = if path == "." { unknown_key(&inner) } else { path };
            ConfigError::Key { key, message: inner }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, overrides)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Range checks on the physical and schedule parameters.
    ///
    /// Chart resolution is left to the chart builder.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite = |key: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::key(key, "must be finite"))
            }
        };
        finite("epsilon", self.epsilon)?;
        if self.epsilon < 0.0 {
            return Err(ConfigError::key("epsilon", "must be non-negative"));
        }
        if !(self.c_s > 0.0 && self.c_s < 1.0) {
            return Err(ConfigError::key("c_s", "must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(ConfigError::key("alpha", "must lie in [0, 1)"));
        }
        if self.m == 0 {
            return Err(ConfigError::key("m", "must be at least 1"));
        }
        if !(self.chart_margin >= 0.0 && self.chart_margin < 1.0) {
            return Err(ConfigError::key("chart_margin", "must lie in [0, 1)"));
        }
        if self.grid_points < 101 || self.grid_points % 2 == 0 {
            return Err(ConfigError::key("grid_points", "must be odd and at least 101"));
        }
        if self.velocity_nodes < 64 {
            return Err(ConfigError::key("velocity_nodes", "must be at least 64"));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(ConfigError::key("t_max", "must be positive"));
        }
        if self.samples_per_period == 0 {
            return Err(ConfigError::key("samples_per_period", "must be at least 1"));
        }
        let (lo, hi) = self.fit_window;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(ConfigError::key("fit_window", "must satisfy 0 < t_lo < t_hi"));
        }
        if !(self.dt_fd.is_finite() && self.dt_fd > 0.0) {
            return Err(ConfigError::key("dt_fd", "must be positive"));
        }
        if !(self.flow_tolerance > 0.0 && self.flow_tolerance <= 1e-3) {
            return Err(ConfigError::key("flow_tolerance", "must lie in (0, 1e-3]"));
        }
        if let Some(times) = &self.evolve_times {
            if times.is_empty() || times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ConfigError::key("evolve_times", "must be finite and strictly increasing"));
            }
        }
        if self.validation_samples < 2 {
            return Err(ConfigError::key("validation_samples", "must be at least 2"));
        }
        Ok(())
    }
}

// serde reports unknown fields at the parent path; pull the name out of the message
fn unknown_key(message: &str) -> String {
    message
        .strip_prefix("unknown field `")
        .and_then(|rest| rest.split('`').next())
        .unwrap_or(".")
        .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(ExperimentConfig::from_json("{}", &[]).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_json(r#"{"epsilon": 0.1, "epsilom": 2}"#, &[]).unwrap_err();
        match err {
            ConfigError::Key { key, .. } => assert_eq!(key, "epsilom"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_type_is_named() {
        let err = ExperimentConfig::from_json(r#"{"n_k": "many"}"#, &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Key { ref key, .. } if key == "n_k"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"fit_window": [1, "x"]}"#, &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Key { ref key, .. } if key.starts_with("fit_window")), "{err}");
    }

    #[test]
    fn range_violations_are_named() {
        for (doc, key) in [
            (r#"{"c_s": 1.5}"#, "c_s"),
            (r#"{"alpha": 1.0}"#, "alpha"),
            (r#"{"grid_points": 200}"#, "grid_points"),
            (r#"{"fit_window": [50, 20]}"#, "fit_window"),
            (r#"{"epsilon": -1}"#, "epsilon"),
        ] {
            let err = ExperimentConfig::from_json(doc, &[]).unwrap_err();
            assert!(matches!(err, ConfigError::Key { key: ref k, .. } if k == key), "{doc}: {err}");
        }
    }

    #[test]
    fn overrides_take_precedence() {
        let cfg = ExperimentConfig::from_json(
            r#"{"epsilon": 0.2}"#,
            &["epsilon=0".into(), "output_dir=/tmp/run".into(), "control=true".into()],
        )
        .unwrap();
        assert_eq!(cfg.epsilon, 0.0);
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/run"));
        assert!(cfg.control);
        assert!(ExperimentConfig::from_json("{}", &["epsilon".into()]).is_err());
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(ExperimentConfig::from_json("{", &[]), Err(ConfigError::Syntax(_))));
        assert!(matches!(ExperimentConfig::from_json("[1]", &[]), Err(ConfigError::Syntax(_))));
    }
}
