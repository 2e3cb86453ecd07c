//! Experiment configuration files.
//!
//! A config is a TOML document. Top-level keys describe one run; an optional
//! `[[variant]]` array lists named copies of it with dotted-key overrides, e.g.
//!
//! ```toml
//! algorithm = "csgd_asss"
//! passes = 50
//! seeds = [1, 2, 3]
//!
//! [objective]
//! kind = "interpolated_regression"
//! n = 2000
//! d = 256
//! feature_std = 3.1622776601683795
//! seed = 7
//!
//! [compression]
//! ratio = 0.01
//!
//! [[variant]]
//! name = "unscaled"
//! "armijo.scale_a" = 1.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compression::CompressionSpec;
use crate::linesearch::ArmijoConfig;
use crate::objectives::ObjectiveSpec;
use crate::optimizers::Algorithm;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{context}: {message}")]
    Parse { context: String, message: String },
    #[error("invalid config{}: {message}", field.as_ref().map(|f| format!(" field `{f}`")).unwrap_or_default())]
    Invalid { field: Option<String>, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: Some(field.to_string()), message: message.into() }
}

/// Exactly one of `k` or `ratio` (`k = round(ratio·d)`); omitted means lossless.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub armijo: ArmijoConfig,
    #[serde(default)]
    pub compression: CompressionConfig,
    /// Number of iterations `T`; exclusive with `passes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    /// `T = round(passes · iterations_per_epoch)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passes: Option<f64>,
    pub seeds: Vec<u64>,
    /// Constant step of `nonadaptive_csgd` (required there, rejected elsewhere).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_fixed: Option<f64>,
    /// Worker count of `dcsgd_asss` (required there, rejected elsewhere).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Mini-batch size of stochastic single-node methods; default 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    /// Output directory; the CLI can override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { context: "config".into(), message: e.to_string() })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = self.objective.dim();
        if d == 0 {
            return Err(invalid("objective", "dimension must be positive"));
        }
        self.armijo.validate().map_err(|e| invalid("armijo", e.to_string()))?;
        self.compression_spec()?;
        match (self.iterations, self.passes) {
            (Some(0), None) => return Err(invalid("iterations", "must be positive")),
            (Some(_), None) => {}
            (None, Some(p)) if p > 0.0 && p.is_finite() => {}
            (None, Some(_)) => return Err(invalid("passes", "must be positive")),
            _ => return Err(invalid("iterations", "exactly one of `iterations` or `passes` is required")),
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }
        let lossless = self.compression_spec()?.is_lossless();
        let alg = self.algorithm.name();
        match self.algorithm {
            Algorithm::NonadaptiveCsgd => match self.eta_fixed {
                Some(eta) if eta >= 0.0 && eta.is_finite() => {}
                Some(_) => return Err(invalid("eta_fixed", "must be non-negative")),
                None => return Err(invalid("eta_fixed", "required by nonadaptive_csgd")),
            },
            _ if self.eta_fixed.is_some() => {
                return Err(invalid("eta_fixed", format!("not used by {alg}")));
            }
            _ => {}
        }
        match self.algorithm {
            Algorithm::DcsgdAsss => match self.workers {
                Some(w) if w >= 1 => {}
                _ => return Err(invalid("workers", "dcsgd_asss requires workers >= 1")),
            },
            _ if self.workers.is_some() => return Err(invalid("workers", format!("not used by {alg}"))),
            _ => {}
        }
        if matches!(self.algorithm, Algorithm::ScaledGd | Algorithm::SgdArmijo) && !lossless {
            return Err(invalid("compression", format!("{alg} is uncompressed")));
        }
        if let Some(b) = self.batch {
            if b == 0 {
                return Err(invalid("batch", "must be positive"));
            }
            if matches!(self.algorithm, Algorithm::ScaledGd | Algorithm::DcsgdAsss) {
                return Err(invalid("batch", format!("not used by {alg}")));
            }
        }
        Ok(())
    }

    pub fn compression_spec(&self) -> Result<CompressionSpec, ConfigError> {
        let d = self.objective.dim();
        match (self.compression.k, self.compression.ratio) {
            (None, None) => Ok(CompressionSpec::identity(d.max(1))),
            (Some(k), None) => CompressionSpec::new(k, d).map_err(|e| invalid("compression.k", e.to_string())),
            (None, Some(r)) if r > 0.0 && r <= 1.0 => {
                CompressionSpec::from_ratio(r, d).map_err(|e| invalid("compression.ratio", e.to_string()))
            }
            (None, Some(_)) => Err(invalid("compression.ratio", "must lie in (0, 1]")),
            (Some(_), Some(_)) => Err(invalid("compression", "give `k` or `ratio`, not both")),
        }
    }

    /// Iterations (rounds) that touch `n` samples on average.
    pub fn iterations_per_epoch(&self, n: usize) -> f64 {
        match self.algorithm {
            Algorithm::ScaledGd => 1.0,
            Algorithm::DcsgdAsss => n as f64 / self.workers.unwrap_or(1) as f64,
            _ => n as f64 / self.batch.unwrap_or(1) as f64,
        }
    }

    pub fn total_iterations(&self, n: usize) -> usize {
        match (self.iterations, self.passes) {
            (Some(t), _) => t,
            (None, Some(p)) => ((p * self.iterations_per_epoch(n)).round() as usize).max(1),
            (None, None) => 0,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// A named run of a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub config: ExperimentConfig,
}

/// Set `dotted` (e.g. `armijo.scale_a`) in `table`, creating sub-tables.
pub fn apply_override(table: &mut toml::Table, dotted: &str, value: toml::Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = dotted.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(invalid(dotted, "malformed parameter name"));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| invalid(dotted, format!("`{part}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Parse a command-line value as TOML (numbers, booleans, arrays), falling back to a string.
pub fn parse_value(text: &str) -> toml::Value {
    let wrapped = format!("v = {text}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(text.into())),
        Err(_) => toml::Value::String(text.to_string()),
    }
}

fn table_to_config(table: toml::Table, context: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse { context: context.to_string(), message: e.to_string() })?;
    validated(cfg, context)
}

fn validated(cfg: ExperimentConfig, context: &str) -> Result<ExperimentConfig, ConfigError> {
    cfg.validate().map_err(|e| match e {
        ConfigError::Invalid { field, message } => {
            ConfigError::Invalid { field, message: format!("{message} (in {context})") }
        }
        other => other,
    })?;
    Ok(cfg)
}

/// Parse a config document into its variants.
pub fn parse_variants(text: &str, context: &str) -> Result<Vec<Variant>, ConfigError> {
    let table = parse_table(text, context)?;
    if !table.contains_key("variant") {
        // Straight from the text, so schema errors keep their line numbers.
        let cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e: toml::de::Error| ConfigError::Parse { context: context.to_string(), message: e.to_string() })?;
        return Ok(vec![Variant { name: SINGLE_RUN.into(), config: validated(cfg, context)? }]);
    }
    expand(table, context, &[])
}

/// One copy of every variant per value of `param`; the swept value is applied last.
pub fn sweep_variants(text: &str, context: &str, param: &str, values: &[String]) -> Result<Vec<Variant>, ConfigError> {
    if values.is_empty() {
        return Err(invalid("values", "sweep needs at least one value"));
    }
    let table = parse_table(text, context)?;
    let mut out = Vec::new();
    for raw in values {
        let label = format!("{param}={}", raw.trim()).replace(['/', '\\'], "_");
        let extra = [(param.to_string(), parse_value(raw.trim()))];
        for mut v in expand(table.clone(), context, &extra)? {
            v.name = if v.name == SINGLE_RUN { label.clone() } else { format!("{}.{label}", v.name) };
            out.push(v);
        }
    }
    Ok(out)
}

/// Name given to the only variant of a config without `[[variant]]` tables.
pub const SINGLE_RUN: &str = "run";

fn parse_table(text: &str, context: &str) -> Result<toml::Table, ConfigError> {
    text.parse().map_err(|e: toml::de::Error| ConfigError::Parse { context: context.to_string(), message: e.to_string() })
}

fn expand(mut table: toml::Table, context: &str, extra: &[(String, toml::Value)]) -> Result<Vec<Variant>, ConfigError> {
    let with_extra = |mut t: toml::Table| -> Result<toml::Table, ConfigError> {
        for (k, v) in extra {
            apply_override(&mut t, k, v.clone())?;
        }
        Ok(t)
    };
    let Some(variants) = table.remove("variant") else {
        return Ok(vec![Variant { name: SINGLE_RUN.into(), config: table_to_config(with_extra(table)?, context)? }]);
    };
    let list = variants.as_array().ok_or_else(|| invalid("variant", "must be an array of tables (`[[variant]]`)"))?;
    let mut out = Vec::new();
    for (i, v) in list.iter().enumerate() {
        let v = v.as_table().ok_or_else(|| invalid("variant", "entries must be tables"))?;
        let name = v
            .get("name")
            .and_then(|n| n.as_str())
            .ok_or_else(|| invalid("variant", format!("entry {i} needs a string `name`")))?;
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(invalid("variant", format!("unusable variant name `{name}`")));
        }
        if out.iter().any(|o: &Variant| o.name == name) {
            return Err(invalid("variant", format!("duplicate variant name `{name}`")));
        }
        let mut merged = table.clone();
        for (k, val) in v.iter().filter(|(k, _)| k.as_str() != "name") {
            apply_override(&mut merged, k, val.clone())?;
        }
        let merged = with_extra(merged)?;
        out.push(Variant { name: name.to_string(), config: table_to_config(merged, &format!("{context}, variant `{name}`"))? });
    }
    if out.is_empty() {
        return Err(invalid("variant", "variant list is empty"));
    }
    Ok(out)
}

pub fn load_variants(path: &Path) -> Result<Vec<Variant>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_variants(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
algorithm = "csgd_asss"
iterations = 10
seeds = [1, 2]

[objective]
kind = "interpolated_regression"
n = 20
d = 8
feature_std = 1.0
seed = 3

[compression]
k = 2
"#;

    #[test]
    fn parses_and_validates() {
        let v = parse_variants(BASE, "base").unwrap();
        assert_eq!(v.len(), 1);
        let c = &v[0].config;
        assert_eq!(c.compression_spec().unwrap().k(), 2);
        assert_eq!(c.armijo, ArmijoConfig::default());
        assert_eq!(c.total_iterations(20), 10);
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(&back, c);
    }

    #[test]
    fn rejects_unknown_and_misplaced_keys() {
        let unknown = format!("{BASE}\nbogus = 1\n");
        assert!(matches!(parse_variants(&unknown, "x"), Err(ConfigError::Parse { .. })));
        let inner = BASE.replace("k = 2", "k = 2\nextra = 3");
        assert!(parse_variants(&inner, "x").is_err());
        let eta = BASE.replace("iterations = 10", "iterations = 10\neta_fixed = 0.1");
        assert!(matches!(parse_variants(&eta, "x"), Err(ConfigError::Invalid { .. })));
        let missing = BASE.replace("csgd_asss", "nonadaptive_csgd");
        assert!(matches!(parse_variants(&missing, "x"), Err(ConfigError::Invalid { .. })));
        let gd = BASE.replace("csgd_asss", "scaled_gd");
        assert!(parse_variants(&gd, "x").is_err());
        let both = BASE.replace("iterations = 10", "iterations = 10\npasses = 2");
        assert!(parse_variants(&both, "x").is_err());
        let err = parse_variants("algorithm = \n", "f.cfg").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn variants_and_overrides() {
        let text = format!("{BASE}\n[[variant]]\nname = \"a\"\n\"armijo.scale_a\" = 1.0\n\n[[variant]]\nname = \"b\"\npasses = 2.0\niterations = 0\n");
        // `iterations = 0` plus `passes` is invalid, so variant b fails.
        assert!(parse_variants(&text, "x").is_err());
        let text = format!("{BASE}\n[[variant]]\nname = \"a\"\n\"armijo.scale_a\" = 1.0\n\n[[variant]]\nname = \"b\"\n\"compression.k\" = 8\n");
        let v = parse_variants(&text, "x").unwrap();
        assert_eq!(v[0].config.armijo.scale_a, 1.0);
        assert_eq!(v[1].config.compression_spec().unwrap().k(), 8);
    }

    #[test]
    fn value_parsing() {
        assert_eq!(parse_value("0.5"), toml::Value::Float(0.5));
        assert_eq!(parse_value("3"), toml::Value::Integer(3));
        assert_eq!(parse_value("at_alpha_max"), toml::Value::String("at_alpha_max".into()));
        let mut t = toml::Table::new();
        apply_override(&mut t, "armijo.sigma", toml::Value::Float(0.2)).unwrap();
        assert_eq!(t["armijo"]["sigma"].as_float(), Some(0.2));
        assert!(apply_override(&mut t, "armijo..x", toml::Value::Float(0.2)).is_err());
    }

    #[test]
    fn sweeps_cross_variants() {
        let v = sweep_variants(BASE, "x", "armijo.scale_a", &["0.1".into(), "0.2".into()]).unwrap();
        assert_eq!(v.iter().map(|v| v.name.as_str()).collect::<Vec<_>>(), ["armijo.scale_a=0.1", "armijo.scale_a=0.2"]);
        assert_eq!(v[1].config.armijo.scale_a, 0.2);
        let text = format!("{BASE}\n[[variant]]\nname = \"a\"\n\"armijo.scale_a\" = 1.0\n");
        let v = sweep_variants(&text, "x", "armijo.scale_a", &["0.5".into()]).unwrap();
        assert_eq!(v[0].name, "a.armijo.scale_a=0.5");
        assert_eq!(v[0].config.armijo.scale_a, 0.5);
        assert!(sweep_variants(BASE, "x", "armijo.bogus", &["1".into()]).is_err());
        assert!(sweep_variants(BASE, "x", "iterations", &[]).is_err());
    }

    #[test]
    fn passes_map_to_iterations() {
        let text = BASE.replace("iterations = 10", "passes = 1.5");
        let c = &parse_variants(&text, "x").unwrap()[0].config;
        assert_eq!(c.total_iterations(20), 30);
    }
}
