//! JSON config loading, dotted-path overrides and the estimate/sample config.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use serde_json::Value;

use tlshrink::harness::{ExperimentPlan, MethodSpec, SCHEMA_VERSION};
use tlshrink::hs_gibbs::HsOptions;
use tlshrink::pcp::PcpOptions;

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Remove and check `schema_version`; absent means current.
pub fn take_schema_version(v: &mut Value) -> Result<()> {
    if let Some(obj) = v.as_object_mut() {
        if let Some(ver) = obj.remove("schema_version") {
            if ver.as_u64() != Some(SCHEMA_VERSION as u64) {
                bail!("schema_version {ver} is not supported (expected {SCHEMA_VERSION})");
            }
        }
    }
    Ok(())
}

/// Recursive merge: objects merge key by key, anything else replaces.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

/// Apply `a.b.c=value`. The value is read as JSON when it parses, else as a
/// string; numeric segments index arrays.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override {spec:?} is not key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            bail!("override {spec:?} has an empty path segment");
        }
        let last = i + 1 == keys.len();
        node = match node {
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .with_context(|| format!("{path}: {key:?} is not an array index"))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| anyhow!("{path}: index {idx} out of range ({len} items)"))?
            }
            Value::Object(map) => map.entry(key.to_string()).or_insert(if last {
                Value::Null
            } else {
                Value::Object(Default::default())
            }),
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut()
                    .unwrap()
                    .entry(key.to_string())
                    .or_insert(Value::Null)
            }
            _ => bail!("{path}: cannot descend into a scalar at {key:?}"),
        };
    }
    *node = value;
    Ok(())
}

pub fn apply_overrides(root: &mut Value, specs: &[String]) -> Result<()> {
    specs.iter().try_for_each(|s| apply_override(root, s))
}

/// Config for `estimate` and `sample`: a scenario file plus one method and
/// the sampler settings it uses.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// Scenario CSV written by `simulate`; relative to the config file.
    pub scenario: PathBuf,
    pub method: MethodSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub hs_tau: Option<f64>,
    #[serde(default)]
    pub hs: HsOptions,
    #[serde(default)]
    pub pcp: PcpOptions,
    #[serde(default)]
    pub sample_sigma: bool,
}

impl EstimateConfig {
    /// An experiment plan carrying only the method settings.
    pub fn settings(&self) -> ExperimentPlan {
        ExperimentPlan {
            methods: vec![self.method.clone()],
            seed: self.seed,
            hs_tau: self.hs_tau,
            hs: self.hs.clone(),
            pcp: self.pcp.clone(),
            sample_sigma: self.sample_sigma,
            ..ExperimentPlan::default()
        }
    }
}
