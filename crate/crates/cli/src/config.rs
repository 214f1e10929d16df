//! Experiment configuration: defaults, then a `key = value` file, then
//! command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use symmin::{ConcaveNonlinearity, Domain, EnergyFunctional, MinimizeOptions, SymmetryGroup};

/// Raised for anything the user mistyped; mapped to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

const KEYS: &[&str] = &[
    "domain",
    "resolution",
    "group",
    "functional",
    "nonlinearity",
    "seed",
    "smoothness",
    "out",
    "input",
    "pgm",
    "max_iters",
    "grad_tol",
    "pairs",
    "p",
    "shape",
    "minor",
    "fields",
];

/// Parse a flat `key = value` file. `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(usage(format!(
                "{}:{}: expected key = value",
                path.display(),
                n + 1
            )));
        };
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(usage(format!(
                "{}:{}: unknown key '{}'",
                path.display(),
                n + 1,
                k.trim()
            )));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub domain: Domain,
    /// Set explicitly, so it overrides the domain detected on import.
    pub domain_explicit: bool,
    pub resolution: usize,
    pub group: SymmetryGroup,
    pub group_spec: String,
    pub functional: EnergyFunctional,
    pub nonlinearity: ConcaveNonlinearity,
    pub seed: u64,
    pub smoothness: usize,
    pub out: String,
    pub input: Option<PathBuf>,
    pub pgm: bool,
    pub solver: MinimizeOptions,
    pub pairs: usize,
    pub p: Option<f64>,
    pub shape: (usize, usize),
    pub minor: usize,
    pub fields: u64,
}

/// String form of the resolved configuration, echoed into every report.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigSummary {
    pub domain: String,
    pub resolution: usize,
    pub group: String,
    pub functional: String,
    pub nonlinearity: String,
    pub seed: u64,
    pub smoothness: usize,
    pub input: Option<String>,
}

fn parse<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|e| usage(format!("{key} = '{v}': {e}"))),
    }
}

impl ExperimentConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str, d: &str| map.get(k).cloned().unwrap_or_else(|| d.to_string());
        let domain: Domain = get("domain", "square")
            .parse()
            .map_err(|e| usage(format!("domain: {e}")))?;
        let group_spec = get(
            "group",
            if domain.dim() == Some(1) {
                "reflect1d"
            } else {
                "dihedral:4"
            },
        );
        let group: SymmetryGroup = group_spec
            .parse()
            .map_err(|e| usage(format!("group: {e}")))?;
        let nonlinearity: ConcaveNonlinearity = get("nonlinearity", "linear:1")
            .parse()
            .map_err(|e| usage(format!("nonlinearity: {e}")))?;
        let (mid, slope) = nonlinearity.concavity_defect(1000, 0);
        if mid > 1e-12 || slope > 1e-12 {
            bail!(usage(format!(
                "nonlinearity {nonlinearity} fails the sampled concavity check"
            )));
        }
        let functional = EnergyFunctional::parse(&get("functional", "plaplace:p=2"), nonlinearity)
            .map_err(|e| usage(format!("functional: {e}")))?;
        let shape_spec = get("shape", "2x2");
        let shape = shape_spec
            .split_once('x')
            .and_then(|(k, n)| Some((k.trim().parse().ok()?, n.trim().parse().ok()?)))
            .ok_or_else(|| usage(format!("shape '{shape_spec}' must look like 2x3")))?;
        let defaults = MinimizeOptions::default();
        let solver = MinimizeOptions {
            max_iters: parse(map, "max_iters", defaults.max_iters)?,
            grad_tol: parse(map, "grad_tol", defaults.grad_tol)?,
            seed: parse(map, "seed", 0)?,
            ..defaults
        };
        if solver.max_iters == 0 || !(solver.grad_tol > 0.0) {
            bail!(usage("max_iters must be positive and grad_tol > 0"));
        }
        let p = map
            .get("p")
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| usage(format!("p = '{v}': {e}")))
            })
            .transpose()?;
        if p.is_some_and(|p| !(p > 1.0)) {
            bail!(usage("p must exceed 1"));
        }
        Ok(ExperimentConfig {
            resolution: parse(map, "resolution", 33)?,
            seed: parse(map, "seed", 0)?,
            smoothness: parse(map, "smoothness", 1)?,
            out: get("out", "symmin"),
            input: map.get("input").map(PathBuf::from),
            pgm: parse(map, "pgm", false)?,
            pairs: parse(map, "pairs", 200)?,
            minor: parse(map, "minor", 2)?,
            fields: parse(map, "fields", 10)?,
            domain_explicit: map.contains_key("domain"),
            domain,
            group,
            group_spec,
            functional,
            nonlinearity,
            solver,
            p,
            shape,
        })
    }

    pub fn summary(&self) -> ConfigSummary {
        ConfigSummary {
            domain: self.domain.to_string(),
            resolution: self.resolution,
            group: self.group_spec.clone(),
            functional: self.functional.spec(),
            nonlinearity: self.nonlinearity.to_string(),
            seed: self.seed,
            smoothness: self.smoothness,
            input: self.input.as_ref().map(|p| p.display().to_string()),
        }
    }

    pub fn output_path(&self, suffix: &str) -> PathBuf {
        PathBuf::from(format!("{}_{suffix}", self.out))
    }
}
