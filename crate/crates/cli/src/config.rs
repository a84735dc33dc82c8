//! Experiment configuration.
//!
//! One TOML document with a block per module. Every field has a default, so
//! an empty file is a valid configuration; unknown keys are rejected at every
//! level. `--set block.key=value` overrides are applied to the parsed
//! document before it is checked, with `value` read as a TOML value (bare
//! words fall back to strings).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use landscape::potentials::{BaseKind, PotentialConfig};
use landscape::PotentialSpec;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed; every module derives its own stream from it.
    pub seed: u64,
    pub potential: PotentialConfig,
    pub dynamics: DynamicsConfig,
    pub string: StringConfig,
    pub finite_t: FiniteTConfig,
    pub rates: RatesConfig,
    pub graph: GraphConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            potential: PotentialConfig {
                kind: BaseKind::DoubleWell1d,
                omega_y: None,
                perturbation: None,
            },
            dynamics: DynamicsConfig::default(),
            string: StringConfig::default(),
            finite_t: FiniteTConfig::default(),
            rates: RatesConfig::default(),
            graph: GraphConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowChoice {
    Overdamped,
    Inertial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    pub kind: FlowChoice,
    pub epsilon: f64,
    pub gamma: f64,
    pub mass: f64,
    /// Defaults to a step suited to the potential family.
    pub dt: Option<f64>,
    pub steps: usize,
    /// Initial position; defaults to the first default string endpoint.
    pub x0: Option<Vec<f64>>,
    pub p0: Option<Vec<f64>>,
    /// Trajectory rows are written every this many steps.
    pub output_every: usize,
    /// Independent chains for `transitions`.
    pub chains: usize,
    pub capture_radius: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            kind: FlowChoice::Overdamped,
            epsilon: 0.12,
            gamma: 1.0,
            mass: 1.0,
            dt: None,
            steps: 100_000,
            x0: None,
            p0: None,
            output_every: 10,
            chains: 4,
            capture_radius: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StringConfig {
    pub images: usize,
    pub dt: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub k_spring: f64,
    /// Endpoints; default to the two deepest minima.
    pub start: Option<Vec<f64>>,
    pub end: Option<Vec<f64>>,
}

impl Default for StringConfig {
    fn default() -> Self {
        Self {
            images: 50,
            dt: None,
            tol: 1e-4,
            max_iter: 200_000,
            k_spring: 1000.0,
            start: None,
            end: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiniteTConfig {
    pub realizations: usize,
    pub kt: f64,
    pub dt: Option<f64>,
    /// Steps of the averaging phase.
    pub steps: usize,
    /// Defaults to 20% of `steps`.
    pub burn_in: Option<usize>,
    /// Defaults to `steps`.
    pub sampling_steps: Option<usize>,
    pub stride: usize,
    pub relaxation: f64,
    /// Defaults to `string.images`.
    pub images: Option<usize>,
    /// Minimum effective sample size per hyperplane for the residual report.
    pub min_effective_samples: f64,
}

impl Default for FiniteTConfig {
    fn default() -> Self {
        Self {
            realizations: 32,
            kt: 0.05,
            dt: None,
            steps: 10_000,
            burn_in: None,
            sampling_steps: None,
            stride: 10,
            relaxation: 1.0,
            images: None,
            min_effective_samples: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesConfig {
    pub kt: Vec<f64>,
    pub friction: f64,
    pub hermite_nodes: usize,
}

impl Default for RatesConfig {
    fn default() -> Self {
        Self {
            kt: vec![0.06],
            friction: 1.0,
            hermite_nodes: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    /// Explicit seeds; otherwise a regular grid over the sampling box.
    pub seeds: Option<Vec<Vec<f64>>>,
    pub seed_grid: usize,
    pub kt: Option<f64>,
    pub capture_radius: f64,
    /// Grid resolution of the captured-mass diagnostic.
    pub grid_resolution: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            seeds: None,
            seed_grid: 8,
            kt: None,
            capture_radius: 0.2,
            grid_resolution: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Parses `text`, applies `overrides`, and checks the result.
    #[cfg(test)]
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        Self::from_layers(&[text], overrides)
    }

    /// Later documents override earlier ones key by key; `overrides` apply
    /// last.
    pub fn from_layers(layers: &[&str], overrides: &[String]) -> Result<Self, CliError> {
        let mut doc = toml::Table::new();
        for text in layers {
            let layer: toml::Table = text
                .parse()
                .map_err(|e: toml::de::Error| CliError::Config(format!("{e}")))?;
            merge(&mut doc, layer);
        }
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let config: ExperimentConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// `preset`, then the file at `path`, then `overrides`.
    pub fn load(
        preset: Option<&str>,
        path: Option<&Path>,
        overrides: &[String],
    ) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_layers(&[preset.unwrap_or(""), &text], overrides)
    }

    fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(CliError::Config(format!(
                    "`{name}` must be positive, got {v}"
                )))
            }
        };
        positive("dynamics.gamma", self.dynamics.gamma)?;
        positive("dynamics.mass", self.dynamics.mass)?;
        positive("dynamics.capture_radius", self.dynamics.capture_radius)?;
        positive("finite_t.kt", self.finite_t.kt)?;
        positive("rates.friction", self.rates.friction)?;
        positive("graph.capture_radius", self.graph.capture_radius)?;
        positive("string.tol", self.string.tol)?;
        if self.dynamics.output_every == 0 {
            return Err(CliError::Config(
                "`dynamics.output_every` must be at least 1".into(),
            ));
        }
        if self.rates.kt.is_empty() {
            return Err(CliError::Config(
                "`rates.kt` must list at least one temperature".into(),
            ));
        }
        for &kt in &self.rates.kt {
            positive("rates.kt", kt)?;
        }
        Ok(())
    }

    /// Canonical serialization; the basis of the configuration hash.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical`], with the
    /// output directory left out: where artifacts go does not change them.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        let digest = Sha256::digest(c.canonical().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec, CliError> {
        self.potential
            .build()
            .map_err(|e| CliError::Config(format!("potential: {e}")))
    }
}

fn merge(into: &mut toml::Table, from: toml::Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(toml::Value::Table(a)), toml::Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!(
            "override key `{path}` is malformed"
        )));
    }
    let value = parse_value(raw.trim());
    let mut table = doc;
    for key in &keys[..keys.len() - 1] {
        let entry = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| {
            CliError::Config(format!("override `{path}`: `{key}` is not a block"))
        })?;
    }
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
