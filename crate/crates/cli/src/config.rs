//! Run configuration: a flat TOML table with a canonical re-serialization.

use monosphere::classical::{params_from_twist, ModelParams};
use monosphere::quantum::build_space;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub const DEFAULT_TWICE_J_MAX: i32 = 40;

/// Tolerances a config may override, with their defaults.
pub const TOLERANCES: &[(&str, f64)] = &[
    ("eigen_residual", 1e-6),
    ("flow_drift", 1e-9),
    ("flux", 1e-12),
    ("inverse", 1e-8),
    ("isometry", 1e-3),
    ("isometry_twisted", 1e-2),
    ("quadric", 1e-12),
    ("relation_exact", 1e-11),
    ("relation_interior", 1e-9),
    ("sector", 1e-6),
    ("tail_mass", 1e-8),
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: cannot read: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Invalid { path: String, line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub r: f64,
    pub mass: f64,
    pub alpha: f64,
    pub hbar: f64,
    pub twice_l: i32,
    #[serde(default = "default_twice_j_max")]
    pub twice_j_max: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_override: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
}

fn default_twice_j_max() -> i32 {
    DEFAULT_TWICE_J_MAX
}

impl RunConfig {
    /// Canonical TOML text: fixed key order, defaults written out.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of [`RunConfig::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Derived parameters, with `tau_override` applied.
    pub fn params(&self) -> Result<ModelParams, String> {
        let p = params_from_twist(self.twice_l, self.r, self.mass, self.alpha, self.hbar).map_err(|e| e.to_string())?;
        match self.tau_override {
            Some(t) => p.with_tau(t).map_err(|e| e.to_string()),
            None => Ok(p),
        }
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        if let Some(v) = self.tolerances.get(name) {
            return *v;
        }
        TOLERANCES.iter().find(|(n, _)| *n == name).map(|(_, v)| *v).expect("known tolerance name")
    }

    /// Checks everything that does not depend on the command; returns the
    /// offending key and message.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        for (key, v) in [("r", self.r), ("mass", self.mass), ("alpha", self.alpha), ("hbar", self.hbar)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err((key, format!("{key} must be positive and finite, got {v}")));
            }
        }
        let p = params_from_twist(self.twice_l, self.r, self.mass, self.alpha, self.hbar)
            .map_err(|e| ("r", e.to_string()))?;
        if let Some(t) = self.tau_override {
            p.with_tau(t).map_err(|e| ("tau_override", e.to_string()))?;
        }
        if i64::try_from(self.seed).is_err() {
            return Err((
                "seed",
                format!("seed must be at most {} to fit a TOML integer, got {}", i64::MAX, self.seed),
            ));
        }
        if self.twice_j_max < self.twice_l.abs() {
            return Err((
                "twice_j_max",
                format!("twice_j_max = {} is below |twice_l| = {}", self.twice_j_max, self.twice_l.abs()),
            ));
        }
        build_space(self.twice_l, self.twice_j_max, p).map_err(|e| ("twice_j_max", e.to_string()))?;
        for (name, v) in &self.tolerances {
            if !TOLERANCES.iter().any(|(n, _)| n == name) {
                return Err(("tolerances", format!("unknown tolerance `{name}`")));
            }
            if !(*v > 0.0 && v.is_finite()) {
                return Err(("tolerances", format!("tolerance `{name}` must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line on which `key` is assigned, or 1 if it is absent.
fn line_of_key(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let t = l.trim_start();
            t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
                || t.starts_with(&format!("[{key}]"))
        })
        .map_or(1, |i| i + 1)
}

/// Parses and validates config text. `path` is used in messages only.
pub fn parse_config_str(text: &str, path: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid {
        path: path.to_string(),
        line: e.span().map_or(1, |s| line_of_offset(text, s.start)),
        message: e.message().to_string(),
    })?;
    cfg.validate().map_err(|(key, message)| ConfigError::Invalid {
        path: path.to_string(),
        line: line_of_key(text, key),
        message,
    })?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: shown.clone(), source })?;
    parse_config_str(&text, &shown)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "r = 1\nmass = 1\nalpha = 1\nhbar = 1\ntwice_l = 0\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config_str(MINIMAL, "c.toml").unwrap();
        assert_eq!(cfg.twice_j_max, 40);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.params().unwrap().tau, 1.0);
    }

    #[test]
    fn jmax_below_twist_is_rejected_on_its_line() {
        let text = "r = 1\nmass = 1\nalpha = 1\nhbar = 1\ntwice_l = 3\ntwice_j_max = 2\n";
        match parse_config_str(text, "c.toml") {
            Err(ConfigError::Invalid { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_point_at_their_line() {
        let text = "r = 1\nmass = 1\nalpha = = 1\n";
        match parse_config_str(text, "c.toml") {
            Err(ConfigError::Invalid { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_tolerances_are_rejected() {
        assert!(parse_config_str(&format!("{MINIMAL}colour = 3\n"), "c").is_err());
        assert!(parse_config_str(&format!("{MINIMAL}[tolerances]\nbogus = 1e-3\n"), "c").is_err());
        assert!(parse_config_str(&format!("{MINIMAL}[tolerances]\nsector = -1.0\n"), "c").is_err());
        assert!(parse_config_str("r = -1\nmass = 1\nalpha = 1\nhbar = 1\ntwice_l = 0\n", "c").is_err());
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let text = "twice_l = 1\nhbar = 0.5\nalpha = 2\nmass = 3\nr = 1.25\nseed = 7\ntwice_j_max = 11\ntau_override = 0.2\n[tolerances]\nsector = 1e-7\n";
        let cfg = parse_config_str(text, "c").unwrap();
        let once = cfg.canonical();
        let again = parse_config_str(&once, "c").unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.canonical(), once);
        assert_eq!(again.hash(), cfg.hash());
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse_config_str(MINIMAL, "c").unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn tolerance_overrides_take_precedence() {
        let cfg = parse_config_str(&format!("{MINIMAL}[tolerances]\nsector = 1e-3\n"), "c").unwrap();
        assert_eq!(cfg.tolerance("sector"), 1e-3);
        assert_eq!(cfg.tolerance("tail_mass"), 1e-8);
    }
}
