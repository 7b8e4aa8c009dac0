//! Experiment configuration files.
//!
//! TOML with one table per section:
//!
//! ```toml
//! [bath]              # or [system] with explicit energies and V
//! gamma = 0.1
//! levels = 201
//! spacing = 0.01
//!
//! [noise]
//! sigma = 1.0
//!
//! [run]
//! dt = 0.02
//! horizon = 30.0
//! n_traj = 10000
//! record_every = 50
//! master_seed = 7
//! observables = ["survival", "occupations"]
//! engine = "nonlinear-sse"
//! ```
//!
//! Complex numbers are `[re, im]` pairs; `system.v` is a list of rows.

use std::fmt;

use serde::{Deserialize, Serialize};
use sse_decay::ensemble::{Engine, ExperimentPlan, Observable};
use sse_decay::linalg::CMatrix;
use sse_decay::system::{build_flat_bath, compute_ww_params};
use sse_decay::{Complex64, NoiseParams, SystemSpec, WWParams, Warning};

/// A config problem, located as precisely as the input allows.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, &self.field) {
            (Some(l), Some(k)) => write!(f, "line {l}, field `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "field `{k}`: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDoc {
    pub energies: Vec<f64>,
    pub v: Vec<Vec<[f64; 2]>>,
    pub manifold: Vec<usize>,
    pub initial: usize,
    #[serde(default)]
    pub selection_rule: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_spacing: Option<f64>,
}

impl SystemDoc {
    pub fn from_spec(spec: &SystemSpec) -> Self {
        let n = spec.dim();
        SystemDoc {
            energies: spec.energies().to_vec(),
            v: (0..n)
                .map(|i| (0..n).map(|j| [spec.v()[(i, j)].re, spec.v()[(i, j)].im]).collect())
                .collect(),
            manifold: spec.manifold().to_vec(),
            initial: spec.initial(),
            selection_rule: spec.selection_rule_asserted(),
            level_spacing: spec.level_spacing(),
        }
    }

    pub fn to_spec(&self) -> Result<SystemSpec, String> {
        let n = self.energies.len();
        if self.v.len() != n || self.v.iter().any(|r| r.len() != n) {
            return Err(format!("v must be {n}x{n} to match energies"));
        }
        let v = CMatrix::from_fn(n, n, |i, j| Complex64::new(self.v[i][j][0], self.v[i][j][1]));
        let mut spec = SystemSpec::new(self.energies.clone(), v, self.manifold.clone(), self.initial)
            .map_err(|e| e.to_string())?;
        if self.selection_rule {
            spec = spec.with_selection_rule().map_err(|e| e.to_string())?;
        }
        if let Some(s) = self.level_spacing {
            spec = spec.with_level_spacing(s).map_err(|e| e.to_string())?;
        }
        Ok(spec)
    }
}

/// A standalone `SystemSpec` document.
pub fn system_to_toml(spec: &SystemSpec) -> String {
    #[derive(Serialize)]
    struct Wrap<'a> {
        system: &'a SystemDoc,
    }
    toml::to_string(&Wrap {
        system: &SystemDoc::from_spec(spec),
    })
    .expect("system documents always serialize")
}

pub fn system_from_toml(text: &str) -> Result<SystemSpec, ConfigError> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Wrap {
        system: SystemDoc,
    }
    let w: Wrap = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    w.system.to_spec().map_err(|m| located(text, "system", "energies", m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathDoc {
    pub gamma: f64,
    pub levels: usize,
    pub spacing: f64,
    #[serde(default)]
    pub e_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseDoc {
    pub sigma: f64,
}

fn default_record_every() -> usize {
    1
}

fn default_observables() -> Vec<String> {
    vec!["survival".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDoc {
    pub dt: f64,
    pub horizon: f64,
    pub n_traj: u64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_observables")]
    pub observables: Vec<String>,
    #[serde(default)]
    pub engine: Option<String>,
    #[serde(default)]
    pub allow_coarse_step: bool,
    #[serde(default)]
    pub initial_state: Option<Vec<[f64; 2]>>,
}

/// Overrides for the mass and width used by the analytic oracles and the
/// pathwise engine.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WwDoc {
    pub mass: Option<f64>,
    pub gamma: Option<f64>,
    pub delta_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub system: Option<SystemDoc>,
    pub bath: Option<BathDoc>,
    pub noise: NoiseDoc,
    pub run: RunDoc,
    #[serde(default)]
    pub ww: Option<WwDoc>,
}

/// A parsed, validated configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub plan: ExperimentPlan,
    pub engine: Option<Engine>,
    pub ww: Option<WWParams>,
    pub warnings: Vec<Warning>,
    /// SHA-256 of the config text, hex encoded.
    pub hash: String,
}

pub fn config_hash(text: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn toml_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let message = e.message().to_string();
    let field = message
        .split('`')
        .nth(1)
        .filter(|_| message.contains("field"))
        .map(str::to_string);
    ConfigError {
        line: e.span().map(|s| line_of(text, s.start)),
        field,
        message,
    }
}

/// Line of `key` inside `[section]`, if it can be found.
fn find_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') && line.ends_with(']') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn located(text: &str, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: find_key(text, section, key),
        field: Some(format!("{section}.{key}")),
        message: message.into(),
    }
}

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let doc: ConfigFile = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    let at = |section: &str, key: &str, msg: String| located(text, section, key, msg);

    let mut warnings = Vec::new();
    let system = match (&doc.system, &doc.bath) {
        (Some(_), Some(_)) => {
            return Err(ConfigError {
                line: None,
                field: None,
                message: "give either [system] or [bath], not both".into(),
            })
        }
        (None, None) => {
            return Err(ConfigError {
                line: None,
                field: None,
                message: "missing [system] or [bath] section".into(),
            })
        }
        (Some(s), None) => s.to_spec().map_err(|m| at("system", "v", m))?,
        (None, Some(b)) => {
            let bath = build_flat_bath(b.gamma, b.levels, b.spacing, b.e_s).map_err(|e| {
                let key = if e.to_string().contains("level_count") {
                    "levels"
                } else if e.to_string().contains("spacing") {
                    "spacing"
                } else {
                    "gamma"
                };
                at("bath", key, e.to_string())
            })?;
            warnings.extend(bath.warnings);
            bath.value.spec
        }
    };
    let noise = NoiseParams::new(doc.noise.sigma).map_err(|e| at("noise", "sigma", e.to_string()))?;
    let run = &doc.run;
    let engine = match &run.engine {
        None => None,
        Some(name) if name == "all" => None,
        Some(name) => Some(Engine::from_name(name).ok_or_else(|| {
            at(
                "run",
                "engine",
                format!("unknown engine `{name}`; expected nonlinear-sse, imaginary-noise, linearized, pathwise-closed-form or all"),
            )
        })?),
    };
    let observables = run
        .observables
        .iter()
        .map(|name| {
            Observable::from_name(name).ok_or_else(|| {
                at(
                    "run",
                    "observables",
                    format!("unknown observable `{name}`; expected survival, decay, occupations, density or bloch"),
                )
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let ww = match &doc.ww {
        Some(WwDoc {
            mass: Some(m),
            gamma: Some(g),
            ..
        }) => Some(WWParams::scalar(system.e_s(), *m, *g).map_err(|e| at("ww", "gamma", e.to_string()))?),
        Some(WwDoc {
            mass: None,
            gamma: None,
            delta_tolerance,
        }) => Some(
            compute_ww_params(&system, delta_tolerance.unwrap_or(1e-9))
                .map_err(|e| at("ww", "delta_tolerance", e.to_string()))?,
        ),
        Some(_) => return Err(at("ww", "mass", "give both ww.mass and ww.gamma, or neither".into())),
        None => compute_ww_params(&system, 1e-9).ok(),
    };

    let mut plan = ExperimentPlan::new(system, noise, run.dt, run.horizon, run.n_traj, run.master_seed);
    plan.observables = observables;
    plan.record_every = run.record_every;
    plan.allow_coarse_step = run.allow_coarse_step;
    plan.initial_state = run
        .initial_state
        .as_ref()
        .map(|v| v.iter().map(|z| Complex64::new(z[0], z[1])).collect());
    plan.ww = ww.clone().filter(|w| w.dim() == 1);
    plan.validate().map_err(|e| {
        let msg = e.to_string();
        let key = if msg.contains("record_every") {
            "record_every"
        } else if msg.contains("horizon") {
            "horizon"
        } else if msg.contains("n_traj") {
            "n_traj"
        } else if msg.contains("observable") || msg.contains("Bloch") {
            "observables"
        } else if msg.contains("initial state") {
            "initial_state"
        } else {
            "dt"
        };
        at("run", key, msg)
    })?;
    Ok(Config {
        plan,
        engine,
        ww,
        warnings,
        hash: config_hash(text),
    })
}
