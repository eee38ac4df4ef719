//! Run configuration files and the built-in presets.
//!
//! A configuration is a TOML document with the top-level keys `label`,
//! `out_dir`, `base` and the tables `[model]`, `[network]`, `[training]`,
//! `[oracle]`, `[sweep]`. `base` names a preset (or a path to another file)
//! that the document is deep-merged over. See the README for the grammar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;
use toml::{Table, Value};

use crate::autodiff::Activation;
use crate::loss::Weighting;
use crate::models::{Anchor, Boundary, ModelError, ModelSpec};
use crate::network::{Head, InitScheme, NetworkConfig, NetworkError};
use crate::oracle::FrontTrackConfig;
use crate::trainer::{TrainConfig, TrainError};

macro_rules! preset {
    ($name:literal) => {
        ($name, include_str!(concat!("../../presets/", $name, ".toml")))
    };
}

pub const PRESETS: &[(&str, &str)] = &[
    preset!("ks-eps0"),
    preset!("ks-eps01"),
    preset!("ks-4d"),
    preset!("ac"),
    preset!("ac-grid"),
    preset!("ac-table"),
    preset!("ac-table-nn"),
    preset!("lv-zero"),
    preset!("lv-pos"),
    preset!("lv-neg"),
    preset!("ablation-a"),
    preset!("ablation-bc"),
    preset!("ac-ablation-a"),
    preset!("lv-ablation-a"),
];

/// Appending this to any preset name selects the full-size network and the
/// original learning-rate schedule.
pub const FULL_SUFFIX: &str = "-full";

const MAX_BASE_DEPTH: usize = 8;
const TOP_LEVEL: &[&str] = &["label", "out_dir", "model", "network", "training", "oracle", "sweep"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}: {message}")]
    Syntax { origin: String, message: String },
    #[error("invalid `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("unknown preset `{0}` (available: {1})")]
    UnknownPreset(String, String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

fn field(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field { field: field.into(), reason: reason.into() }
}

#[derive(Deserialize)]
#[serde(tag = "system", rename_all = "lowercase", deny_unknown_fields)]
enum ModelSection {
    Ks {
        epsilon: f64,
        diffusion: f64,
        chi: f64,
        boundary: Boundary,
        #[serde(default)]
        anchor: Anchor,
    },
    Ac {
        tau: f64,
        alpha: f64,
        #[serde(default)]
        anchor: Anchor,
    },
    Lv {
        b: f64,
        h: f64,
        k: f64,
        d: f64,
        #[serde(default)]
        anchor: Anchor,
    },
}

impl ModelSection {
    fn build(self) -> ModelSpec {
        let (mut spec, anchor) = match self {
            ModelSection::Ks { epsilon, diffusion, chi, boundary, anchor } => (ModelSpec::ks(epsilon, diffusion, chi, boundary), anchor),
            ModelSection::Ac { tau, alpha, anchor } => (ModelSpec::ac(tau, alpha), anchor),
            ModelSection::Lv { b, h, k, d, anchor } => (ModelSpec::lv(b, h, k, d), anchor),
        };
        spec.anchor = anchor;
        spec
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NetworkSection {
    depth: usize,
    width: usize,
    activation: Activation,
    init: InitScheme,
    seed: u64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self { depth: 3, width: 64, activation: Activation::Tanh, init: InitScheme::FanInUniform, seed: 0 }
    }
}

/// Front-tracking overrides; unset fields keep [`FrontTrackConfig::default`].
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontSection {
    pub half_length: Option<f64>,
    pub dx: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub sample_every: Option<f64>,
    pub edge_margin: Option<f64>,
}

impl FrontSection {
    pub fn build(&self) -> FrontTrackConfig {
        let d = FrontTrackConfig::default();
        FrontTrackConfig {
            half_length: self.half_length.unwrap_or(d.half_length),
            dx: self.dx.unwrap_or(d.dx),
            dt: self.dt.or(d.dt),
            t_end: self.t_end.unwrap_or(d.t_end),
            window: self.window.unwrap_or(d.window),
            sample_every: self.sample_every.unwrap_or(d.sample_every),
            edge_margin: self.edge_margin.unwrap_or(d.edge_margin),
        }
    }
}

/// `[oracle]`: the (τ, α) table for Allen–Cahn, front-tracking settings
/// for the other systems, and whether to train a network per row.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub taus: Vec<f64>,
    pub alphas: Vec<f64>,
    pub exclude: Vec<(f64, f64)>,
    pub train: bool,
    pub front: FrontSection,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub label: String,
    pub out_dir: PathBuf,
    pub model: ModelSpec,
    pub network: NetworkConfig,
    pub training: TrainConfig,
    pub oracle: OracleSection,
    /// `(dotted key, values)` in key order.
    pub sweep: Vec<(String, Vec<Value>)>,
    doc: Table,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        Self::from_document(load_file(path, 0)?)
    }

    pub fn from_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        Self::from_document(load_text(text, origin, None, 0)?)
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        Self::from_document(preset_document(name, 0)?)
    }

    pub fn from_document(doc: Table) -> Result<Self, ConfigError> {
        for key in doc.keys() {
            if !TOP_LEVEL.contains(&key.as_str()) {
                return Err(field(key.as_str(), format!("unknown top-level key (expected one of {})", TOP_LEVEL.join(", "))));
            }
        }
        let label = match doc.get("label") {
            Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
            Some(Value::String(_)) => return Err(field("label", "must not be empty")),
            Some(_) => return Err(field("label", "must be a string")),
            None => return Err(field("label", "missing")),
        };
        let out_dir = match doc.get("out_dir") {
            Some(Value::String(s)) if !s.is_empty() => PathBuf::from(s),
            Some(_) => return Err(field("out_dir", "must be a nonempty string")),
            None => PathBuf::from("runs").join(&label),
        };

        let model: ModelSection = section(&doc, "model")?.ok_or_else(|| field("model", "missing section"))?;
        let model = model.build();
        model.validate()?;

        let net: NetworkSection = section(&doc, "network")?.unwrap_or_default();
        let network = NetworkConfig {
            depth: net.depth,
            width: net.width,
            activation: net.activation,
            head: Head::Linear,
            init: net.init,
            seed: net.seed,
        };
        network.validate()?;

        let mut training_table = match doc.get("training") {
            Some(Value::Table(t)) => t.clone(),
            Some(_) => return Err(field("training", "must be a table")),
            None => Table::new(),
        };
        if !training_table.contains_key("weighting") {
            let w = match Weighting::default_for(&model) {
                Weighting::Uniform => "uniform",
                Weighting::GeScaled => "ge_scaled",
            };
            training_table.insert("weighting".into(), Value::String(w.into()));
        }
        let training: TrainConfig = Value::Table(training_table).try_into().map_err(|e| field("training", message(e)))?;
        training.validate()?;
        let oracle: OracleSection = section(&doc, "oracle")?.unwrap_or_default();
        let sweep = match doc.get("sweep") {
            None => Vec::new(),
            Some(Value::Table(t)) => {
                let mut out = Vec::new();
                for (k, v) in t {
                    match v {
                        Value::Array(vals) => out.push((k.clone(), vals.clone())),
                        _ => return Err(field(format!("sweep.{k}"), "must be an array of values")),
                    }
                }
                out
            }
            Some(_) => return Err(field("sweep", "must be a table")),
        };

        Ok(Self { label, out_dir, model, network, training, oracle, sweep, doc })
    }

    /// The resolved document, `base` already merged in.
    pub fn document(&self) -> &Table {
        &self.doc
    }

    /// Canonical text of the resolved document; checkpoints carry its digest.
    pub fn canonical_text(&self) -> String {
        toml::to_string(&self.doc).expect("a parsed document serializes")
    }

    /// Copy with the value at a dotted key replaced, re-validated.
    pub fn with_override(&self, key: &str, value: Value) -> Result<Self, ConfigError> {
        let mut doc = self.doc.clone();
        set_path(&mut doc, key, value)?;
        Self::from_document(doc)
    }

    pub fn with_seed(&self, seed: u64) -> Result<Self, ConfigError> {
        let v = Value::Integer(i64::try_from(seed).map_err(|_| field("seed", "does not fit a TOML integer"))?);
        self.with_override("training.seed", v.clone())?.with_override("network.seed", v)
    }

    pub fn with_epochs(&self, epochs: usize) -> Result<Self, ConfigError> {
        let v = i64::try_from(epochs).map_err(|_| field("epochs", "too large"))?;
        self.with_override("training.epochs", Value::Integer(v))
    }

    pub fn with_out_dir(&self, dir: &Path) -> Result<Self, ConfigError> {
        self.with_override("out_dir", Value::String(dir.to_string_lossy().into_owned()))
    }

    /// Every combination of the `[sweep]` values; the last key varies fastest.
    pub fn sweep_points(&self) -> Result<Vec<Vec<(String, Value)>>, ConfigError> {
        if self.sweep.is_empty() {
            return Err(field("sweep", "no sweep keys declared"));
        }
        let mut points: Vec<Vec<(String, Value)>> = vec![Vec::new()];
        for (key, values) in &self.sweep {
            if values.is_empty() {
                return Err(field(format!("sweep.{key}"), "empty value list"));
            }
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((key.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        Ok(points)
    }
}

fn message(e: impl std::fmt::Display) -> String {
    e.to_string().trim().replace('\n', " ")
}

fn section<T: for<'de> Deserialize<'de>>(doc: &Table, name: &str) -> Result<Option<T>, ConfigError> {
    match doc.get(name) {
        Some(v @ Value::Table(_)) => v.clone().try_into().map(Some).map_err(|e| field(name, message(e))),
        Some(_) => Err(field(name, "must be a table")),
        None => Ok(None),
    }
}

fn set_path(doc: &mut Table, key: &str, value: Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(field(key, "malformed dotted key"));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut t = doc;
    for p in parents {
        let entry = t.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        t = match entry {
            Value::Table(inner) => inner,
            _ => return Err(field(key, format!("`{p}` is not a table"))),
        };
    }
    t.insert(last.to_string(), value);
    Ok(())
}

/// Recursively merges `over` into `base`; tables merge, everything else
/// replaces.
pub fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

fn preset_document(name: &str, depth: usize) -> Result<Table, ConfigError> {
    if let Some(stem) = name.strip_suffix(FULL_SUFFIX) {
        let mut doc = preset_document(stem, depth)?;
        apply_full_scale(&mut doc);
        return Ok(doc);
    }
    let Some((_, text)) = PRESETS.iter().find(|(n, _)| *n == name) else {
        return Err(ConfigError::UnknownPreset(name.to_string(), preset_names().join(", ")));
    };
    load_text(text, &format!("preset {name}"), None, depth)
}

fn load_file(path: &Path, depth: usize) -> Result<Table, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    load_text(&text, &path.display().to_string(), path.parent(), depth)
}

fn load_text(text: &str, origin: &str, dir: Option<&Path>, depth: usize) -> Result<Table, ConfigError> {
    if depth > MAX_BASE_DEPTH {
        return Err(field("base", format!("chain deeper than {MAX_BASE_DEPTH} (cycle?)")));
    }
    let mut doc: Table = text.parse().map_err(|e| ConfigError::Syntax { origin: origin.to_string(), message: message(e) })?;
    let Some(base) = doc.remove("base") else {
        return Ok(doc);
    };
    let Value::String(base) = base else {
        return Err(field("base", "must be a preset name or a path"));
    };
    let mut merged = if base.ends_with(".toml") || base.contains('/') {
        let p = dir.map(|d| d.join(&base)).unwrap_or_else(|| PathBuf::from(&base));
        load_file(&p, depth + 1)?
    } else {
        preset_document(&base, depth + 1)?
    };
    merge(&mut merged, doc);
    Ok(merged)
}

/// Five layers of 512 units and the original schedule: 1e-6 / 1e-4
/// (2e-6 / 2e-4 for Lotka–Volterra), ×0.9 every 5000 epochs.
pub fn apply_full_scale(doc: &mut Table) {
    let system = doc.get("model").and_then(|m| m.get("system")).and_then(|s| s.as_str()).unwrap_or("").to_string();
    let (lw, ls) = if system == "lv" { (2e-6, 2e-4) } else { (1e-6, 1e-4) };
    let spacetime = doc.get("training").and_then(|t| t.get("sampling")).is_some();
    let mut net = Table::new();
    net.insert("depth".into(), Value::Integer(5));
    net.insert("width".into(), Value::Integer(512));
    let mut tr = Table::new();
    tr.insert("lr_weights".into(), Value::Float(lw));
    tr.insert("lr_speed".into(), Value::Float(ls));
    tr.insert("decay_factor".into(), Value::Float(0.9));
    tr.insert("decay_interval".into(), Value::Integer(5000));
    tr.insert("epochs".into(), Value::Integer(200_000));
    tr.insert("trace_interval".into(), Value::Integer(100));
    if !spacetime {
        tr.insert("half_width".into(), Value::Float(200.0));
    }
    let mut over = Table::new();
    over.insert("network".into(), Value::Table(net));
    over.insert("training".into(), Value::Table(tr));
    merge(doc, over);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::System;

    #[test]
    fn every_preset_parses() {
        for name in preset_names() {
            let cfg = RunConfig::preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(!cfg.label.is_empty());
            let full = RunConfig::preset(&format!("{name}{FULL_SUFFIX}")).unwrap();
            assert_eq!((full.network.depth, full.network.width), (5, 512));
        }
    }

    #[test]
    fn ks_preset_values() {
        let cfg = RunConfig::preset("ks-eps0").unwrap();
        assert_eq!(cfg.training.half_width, 200.0);
        assert_eq!(cfg.training.collocation, 201);
        assert_eq!(cfg.training.weighting, Weighting::Uniform);
        assert!(matches!(cfg.model.system, System::Ks(p) if p.chi == 0.5));
        assert_eq!(cfg.out_dir, PathBuf::from("runs/ks-eps0"));
        let lv = RunConfig::preset("lv-pos-full").unwrap();
        assert_eq!(lv.training.weighting, Weighting::GeScaled);
        assert_eq!((lv.training.lr_weights, lv.training.lr_speed), (2e-6, 2e-4));
    }

    #[test]
    fn base_merges_and_overrides() {
        let cfg = RunConfig::from_str("base = \"ks-eps0\"\nlabel = \"x\"\n[training]\nepochs = 7\n", "inline").unwrap();
        assert_eq!(cfg.training.epochs, 7);
        assert_eq!(cfg.training.collocation, 201);
        assert_eq!(cfg.label, "x");
        let cfg = RunConfig::preset("ac-table-nn").unwrap();
        assert!(cfg.oracle.train);
        assert_eq!(cfg.oracle.taus.len(), 4);
    }

    #[test]
    fn field_level_errors() {
        let bad_ks = "label = \"k\"\n[model]\nsystem = \"ks\"\nepsilon = 0.0\ndiffusion = 2.0\nchi = 0.5\nboundary = { u_minus = -1.0, v_minus = -1.0, u_plus = 1.0, v_plus = 0.0 }\n";
        let e = RunConfig::from_str(bad_ks, "inline").unwrap_err();
        assert!(e.to_string().contains("u_minus"), "{e}");
        let e = RunConfig::from_str("label = \"k\"\n[model]\nsystem = \"ac\"\ntau = 1.0\nalpha = 0.7\ncolour = 3\n", "inline").unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
        let e = RunConfig::from_str("label = \"\"\n", "inline").unwrap_err();
        assert!(e.to_string().contains("label"), "{e}");
        let e = RunConfig::from_str("base = \"ks-eps0\"\n[training]\nepochs = -3\n", "inline").unwrap_err();
        assert!(e.to_string().contains("training"), "{e}");
        assert!(matches!(RunConfig::preset("nope"), Err(ConfigError::UnknownPreset(..))));
        assert!(matches!(RunConfig::from_str("label = ", "inline"), Err(ConfigError::Syntax { .. })));
    }

    #[test]
    fn sweep_grid() {
        let cfg = RunConfig::preset("ablation-a").unwrap();
        let pts = cfg.sweep_points().unwrap();
        assert_eq!(pts.len(), 4);
        let first = cfg.with_override(&pts[0][0].0, pts[0][0].1.clone()).unwrap();
        assert_eq!(first.training.half_width, 1.0);
        assert_eq!(RunConfig::preset("ablation-bc").unwrap().sweep_points().unwrap().len(), 2);
        assert_eq!(RunConfig::preset("ac-grid").unwrap().sweep_points().unwrap().len(), 16);
        assert!(RunConfig::preset("ks-eps0").unwrap().sweep_points().is_err());
        let empty = RunConfig::from_str("base = \"ks-eps0\"\n[sweep]\n\"training.half_width\" = []\n", "inline").unwrap();
        assert!(empty.sweep_points().is_err());
    }

    #[test]
    fn overrides() {
        let cfg = RunConfig::preset("ks-eps0").unwrap().with_seed(9).unwrap().with_epochs(0).unwrap();
        assert_eq!((cfg.training.seed, cfg.network.seed, cfg.training.epochs), (9, 9, 0));
        let cfg = cfg.with_out_dir(Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.out_dir, PathBuf::from("/tmp/x"));
        assert!(cfg.with_override("label.inner", Value::Integer(1)).is_err());
        let text = cfg.canonical_text();
        let again = RunConfig::from_str(&text, "canonical").unwrap();
        assert_eq!(again.canonical_text(), text);
    }
}
