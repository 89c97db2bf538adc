//! Scenario configuration: layered resolution of defaults, presets, a TOML
//! (or manifest JSON) file and command-line overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use zeno_fusion::dynamics::{DEFAULT_DT, DEFAULT_SNAPSHOTS};
use zeno_fusion::hamiltonian::{ModelKind, ModelParams};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    ZenoSpectrum,
    GateEvolve,
    Fuse,
    Lindblad,
    Sweep,
    Network,
    EmitFigure,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::ZenoSpectrum => "zeno-spectrum",
            Scenario::GateEvolve => "gate-evolve",
            Scenario::Fuse => "fuse",
            Scenario::Lindblad => "lindblad",
            Scenario::Sweep => "sweep",
            Scenario::Network => "network",
            Scenario::EmitFigure => "emit-figure",
        }
    }
}

pub const PRESETS: [&str; 4] = ["paper-fig4", "paper-fig5", "paper-figPX", "fast"];

pub const FIGURES: [&str; 8] = ["fig-PX", "fig-4a", "fig-4b", "fig-4c", "fig-5a", "fig-5b", "fig-5c", "fig-5d"];

/// Parameters a sweep may vary.
pub const SWEEPABLE: [&str; 7] = ["lambda", "omega", "delta", "v", "kappa", "gamma", "kappa_f"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Integrator {
    pub dt: f64,
    /// Record every `stride` steps instead of a fixed snapshot count.
    pub stride: Option<usize>,
    pub snapshots: usize,
    /// Defaults to the gate time.
    pub t_final: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sizes {
    pub n: usize,
    pub m: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Network {
    pub pool: Vec<usize>,
    pub target: usize,
    pub trials: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: String,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    /// Explicit grid; takes precedence over start/stop/points.
    pub values: Option<Vec<f64>>,
}

impl Sweep {
    pub fn grid(&self) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        let (a, b, n) = (self.start.unwrap_or(0.0), self.stop.unwrap_or(0.0), self.points.unwrap_or(1));
        if n <= 1 {
            return vec![a];
        }
        let d = (n - 1) as f64;
        (0..n).map(|i| (a * (d - i as f64) + b * i as f64) / d).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    /// Initial basis label; defaults to |g0 g1> with empty modes.
    pub initial: Option<String>,
}

/// Fully resolved configuration; also the `config` block of the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: Scenario,
    pub model: ModelKind,
    pub preset: Option<String>,
    pub params: ModelParams,
    pub stark_compensation: bool,
    pub integrator: Integrator,
    pub fusion: Sizes,
    pub network: Network,
    pub sweep: Sweep,
    pub gate: Gate,
    pub figures: Vec<String>,
    pub seed: u64,
    pub out: String,
    pub dump_state: bool,
}

impl Config {
    pub fn defaults(scenario: Scenario) -> Config {
        Config {
            scenario,
            model: ModelKind::SingleCavity,
            preset: None,
            params: ModelParams::default(),
            stark_compensation: true,
            integrator: Integrator {
                dt: DEFAULT_DT,
                stride: None,
                snapshots: DEFAULT_SNAPSHOTS,
                t_final: None,
            },
            fusion: Sizes { n: 5, m: 5 },
            network: Network {
                pool: vec![5, 5],
                target: 8,
                trials: 10_000,
            },
            sweep: Sweep {
                parameter: "kappa".into(),
                start: Some(0.0),
                stop: Some(0.1),
                points: Some(6),
                values: None,
            },
            gate: Gate { initial: None },
            figures: Vec::new(),
            seed: 7,
            out: "out/".into(),
            dump_state: false,
        }
    }

    /// Resolved config as written to the manifest. Fiber-only parameters
    /// are omitted for the single-cavity model so the echo re-validates.
    pub fn to_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if self.model == ModelKind::SingleCavity {
            let p = v["params"].as_object_mut().expect("params object");
            p.remove("v");
            p.remove("kappa_f");
        }
        v
    }
}

fn preset_layer(name: &str) -> Result<Value, CliError> {
    Ok(match name {
        "fast" => json!({"model": "single_cavity", "params": {"omega": 0.05}}),
        "paper-fig4" => json!({
            "model": "single_cavity",
            "params": {"lambda": 1.0, "omega": 0.01, "delta": 0.8},
            "figures": ["fig-4a", "fig-4b", "fig-4c"],
        }),
        "paper-fig5" => json!({
            "model": "cavity_fiber",
            "params": {"lambda": 1.0, "omega": 0.01, "delta": 0.8, "v": 1.0},
            "figures": ["fig-5a", "fig-5b", "fig-5c", "fig-5d"],
        }),
        "paper-figPX" => json!({"figures": ["fig-PX"]}),
        other => {
            return Err(CliError::Config(format!(
                "preset: unknown preset `{other}` (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    })
}

/// Recursive object merge; `top` wins.
pub fn merge(base: &mut Value, top: &Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, t) => *b = t.clone(),
    }
}

const RATE_KEYS: [&str; 7] = ["lambda", "omega", "delta", "v", "kappa", "gamma", "kappa_f"];

/// Reads a config file. TOML files may carry `[units] unit = "MHz"`, in which
/// case every rate in their `[params]` table is divided by `params.lambda`.
/// JSON files are either a bare config or a manifest with a `config` block.
pub fn read_file(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut v: Value = if path.extension().is_some_and(|e| e == "json") {
        let v: Value = serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
        })?;
        match v.get("config") {
            Some(c) if v.get("outputs").is_some() => c.clone(),
            _ => v,
        }
    } else {
        let t: toml::Value = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::to_value(t).expect("toml converts to json")
    };
    if !v.is_object() {
        return Err(CliError::Config(format!("{}: top level must be a table", path.display())));
    }
    normalize_units(&mut v).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(v)
}

fn normalize_units(v: &mut Value) -> Result<(), String> {
    let Some(units) = v.as_object_mut().and_then(|o| o.remove("units")) else {
        return Ok(());
    };
    let unit = units
        .get("unit")
        .and_then(Value::as_str)
        .ok_or("units.unit: expected a string")?;
    if let Some(k) = units.as_object().and_then(|o| o.keys().find(|k| *k != "unit")) {
        return Err(format!("units.{k}: unknown field"));
    }
    match unit {
        "lambda" => Ok(()),
        "MHz" | "mhz" => {
            let params = v
                .get_mut("params")
                .and_then(Value::as_object_mut)
                .ok_or("units: MHz input needs a [params] table")?;
            let lambda = params
                .get("lambda")
                .and_then(Value::as_f64)
                .filter(|l| *l > 0.0)
                .ok_or("params.lambda: MHz input needs a positive lambda")?;
            for k in RATE_KEYS {
                if let Some(x) = params.get(k).and_then(Value::as_f64) {
                    params.insert(k.into(), json!(x / lambda));
                }
            }
            Ok(())
        }
        other => Err(format!("units.unit: unknown unit `{other}` (expected lambda or MHz)")),
    }
}

/// Parses `a.b.c=value` with a TOML value literal (bare words become strings).
pub fn assignment(text: &str) -> Result<Value, CliError> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set {text}: expected key=value")))?;
    let key = key.trim();
    let parsed: Value = match toml::from_str::<toml::Table>(&format!("x = {raw}")) {
        Ok(t) => serde_json::to_value(&t["x"]).expect("toml converts to json"),
        Err(_) => Value::String(raw.trim().to_string()),
    };
    let mut out = parsed;
    for part in key.split('.').rev() {
        if part.is_empty() {
            return Err(CliError::Config(format!("--set {text}: empty key segment")));
        }
        let mut m = Map::new();
        m.insert(part.to_string(), out);
        out = Value::Object(m);
    }
    Ok(out)
}

/// Resolution order: defaults, preset, file, flags.
pub fn resolve(scenario: Scenario, file: Option<Value>, flags: Value) -> Result<Config, CliError> {
    if let Some(s) = file.as_ref().and_then(|f| f.get("scenario")).and_then(Value::as_str) {
        if s != scenario.name() {
            return Err(CliError::Config(format!(
                "scenario: config file is for `{s}` but `{}` was requested",
                scenario.name()
            )));
        }
    }
    let preset = flags
        .get("preset")
        .or_else(|| file.as_ref().and_then(|f| f.get("preset")))
        .filter(|p| !p.is_null())
        .map(|p| p.as_str().map(str::to_string).ok_or_else(|| CliError::Config("preset: expected a string".into())))
        .transpose()?;

    let mut merged = serde_json::to_value(Config::defaults(scenario)).expect("defaults serialize");
    if let Some(p) = &preset {
        merge(&mut merged, &preset_layer(p)?);
    }
    let mut user = json!({});
    if let Some(f) = &file {
        merge(&mut user, f);
    }
    merge(&mut user, &flags);
    merge(&mut merged, &user);
    merged["scenario"] = json!(scenario.name());
    merged["preset"] = json!(preset);

    let cfg: Config = serde_path_to_error::deserialize(merged)
        .map_err(|e| CliError::Config(format!("{}: {}", e.path(), e.inner())))?;

    if cfg.model == ModelKind::SingleCavity {
        for k in ["v", "kappa_f"] {
            if user.get("params").and_then(|p| p.get(k)).is_some() {
                return Err(CliError::Config(format!(
                    "params.{k}: only valid for the cavity_fiber model"
                )));
            }
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &Config) -> Result<(), CliError> {
    let bad = |m: String| Err(CliError::Config(m));
    cfg.params
        .validate()
        .map_err(|e| CliError::Config(format!("params: {e}")))?;
    let it = &cfg.integrator;
    if !(it.dt > 0.0) || !it.dt.is_finite() {
        return bad(format!("integrator.dt: must be positive, got {}", it.dt));
    }
    if it.stride == Some(0) {
        return bad("integrator.stride: must be at least 1".into());
    }
    if it.snapshots < 2 {
        return bad("integrator.snapshots: must be at least 2".into());
    }
    if let Some(t) = it.t_final {
        if !(t > 0.0) || !t.is_finite() {
            return bad(format!("integrator.t_final: must be positive, got {t}"));
        }
    }
    if cfg.fusion.n < 2 || cfg.fusion.m < 2 {
        return bad("fusion: n and m must be at least 2".into());
    }
    if !SWEEPABLE.contains(&cfg.sweep.parameter.as_str()) {
        return bad(format!(
            "sweep.parameter: `{}` is not sweepable (expected one of {})",
            cfg.sweep.parameter,
            SWEEPABLE.join(", ")
        ));
    }
    if cfg.model == ModelKind::SingleCavity && matches!(cfg.sweep.parameter.as_str(), "v" | "kappa_f") {
        if cfg.scenario == Scenario::Sweep {
            return bad(format!("sweep.parameter: `{}` needs the cavity_fiber model", cfg.sweep.parameter));
        }
    }
    if cfg.sweep.grid().iter().any(|x| !x.is_finite()) || cfg.sweep.values.as_ref().is_some_and(|v| v.is_empty()) {
        return bad("sweep: grid must be non-empty and finite".into());
    }
    if cfg.sweep.points == Some(0) && cfg.sweep.values.is_none() {
        return bad("sweep.points: must be at least 1".into());
    }
    for f in &cfg.figures {
        if !FIGURES.contains(&f.as_str()) {
            return bad(format!("figures: unknown figure `{f}`"));
        }
    }
    if cfg.network.target < 2 {
        return bad("network.target: must be at least 2".into());
    }
    if cfg.network.trials == 0 {
        return bad("network.trials: must be positive".into());
    }
    if cfg.network.pool.is_empty() || cfg.network.pool.contains(&0) {
        return bad("network.pool: must be non-empty with positive sizes".into());
    }
    Ok(())
}
