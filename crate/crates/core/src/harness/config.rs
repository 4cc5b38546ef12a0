//! INI-style run configuration.
//!
//! ```text
//! [grid]
//! dim = 1
//! lx = 1.0
//! nx = 64
//!
//! [kinetics]
//! preset = power_law
//! beta = 1
//! gamma = 2
//! ```
//!
//! Keys are case-sensitive, `#` starts a comment, and unknown sections or keys
//! are rejected with the offending line number.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::diagnostics::{DiagnosticsConfig, PlateauPolicy};
use crate::exponents::{ModelParams, ParamError};
use crate::grid::Grid;
use crate::kinetics::{Kinetics, KineticsError, Preset, PresetExtra, Table};
use crate::stepper::{InitialData, InitialV, Profile, RunControls, SimConfig, SimError};

use super::sweep::{AxisRange, SweepAxis, SweepConfig};

const SCHEMA: &[(&str, &[&str])] = &[
    ("grid", &["dim", "lx", "ly", "nx", "ny"]),
    (
        "kinetics",
        &[
            "preset", "alpha", "beta", "gamma", "a", "mu", "r", "b", "m1", "m2", "table_u", "table_d", "table_s",
            "table_f",
        ],
    ),
    (
        "init",
        &[
            "profile", "mean", "amplitude", "mode", "base", "peak", "cx", "cy", "width", "u_max", "v0",
        ],
    ),
    (
        "run",
        &[
            "t_end",
            "u_cap",
            "dt_max",
            "sigma",
            "record_every",
            "seed",
            "lp",
            "ls",
            "energy_p",
            "energy_q",
            "snapshots",
        ],
    ),
    (
        "sweep",
        &[
            "axis1",
            "axis1_min",
            "axis1_max",
            "axis1_steps",
            "axis2",
            "axis2_min",
            "axis2_max",
            "axis2_steps",
            "workers",
            "plateau_ratio",
        ],
    ),
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: duplicate key `{key}` in [{section}] (first set on line {first})")]
    DuplicateKey {
        line: usize,
        first: usize,
        section: String,
        key: String,
    },
    #[error("bad override `{0}` (expected section.key=value)")]
    Override(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    fn invalid(key: impl Into<String>, reason: impl ToString) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            reason: reason.to_string(),
        }
    }
}

fn known_key(section: &str, key: &str) -> Option<bool> {
    SCHEMA
        .iter()
        .find(|(s, _)| *s == section)
        .map(|(_, keys)| keys.contains(&key))
}

/// Raw `section -> key -> (value, line)` table. Line 0 marks a command-line override.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ini {
    sections: BTreeMap<String, BTreeMap<String, (String, usize)>>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut ini = Ini::default();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Parse {
                        line,
                        message: format!("unterminated section header `{content}`"),
                    })?
                    .trim();
                if known_key(name, "").is_none() {
                    return Err(ConfigError::UnknownSection {
                        line,
                        name: name.to_string(),
                    });
                }
                ini.sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Parse {
                    line,
                    message: "empty key".into(),
                });
            }
            let section = current.clone().ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("key `{key}` appears before any section header"),
            })?;
            ini.insert(&section, key, value.trim(), line)?;
        }
        Ok(ini)
    }

    fn insert(&mut self, section: &str, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        match known_key(section, key) {
            None => {
                return Err(ConfigError::UnknownSection {
                    line,
                    name: section.to_string(),
                })
            }
            Some(false) => {
                return Err(ConfigError::UnknownKey {
                    line,
                    section: section.to_string(),
                    key: key.to_string(),
                })
            }
            Some(true) => {}
        }
        let table = self.sections.entry(section.to_string()).or_default();
        if let Some((_, first)) = table.get(key) {
            if line != 0 {
                return Err(ConfigError::DuplicateKey {
                    line,
                    first: *first,
                    section: section.to_string(),
                    key: key.to_string(),
                });
            }
        }
        table.insert(key.to_string(), (value.to_string(), line));
        Ok(())
    }

    /// Applies `section.key=value`, replacing any value from the file.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError::Override(spec.to_string()))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| ConfigError::Override(spec.to_string()))?;
        self.insert(section, key, value.trim(), 0)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|(v, _)| v.as_str())
    }

    fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => parse_f64(v).map_err(|r| ConfigError::invalid(format!("{section}.{key}"), r)),
        }
    }

    fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError::invalid(format!("{section}.{key}"), format!("`{v}` is not a non-negative integer"))),
        }
    }

    fn list_or(&self, section: &str, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.get(section, key) {
            None => Ok(default.to_vec()),
            Some(v) if v.trim().is_empty() => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|item| parse_f64(item.trim()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|r| ConfigError::invalid(format!("{section}.{key}"), r)),
        }
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    match v {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => v.parse::<f64>().map_err(|_| format!("`{v}` is not a number")),
    }
}

/// Preset, parameters and extras, kept separate from the built [`Kinetics`]
/// so that sweeps can re-derive them per lattice point.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticsSpec {
    pub preset: Preset,
    pub params: ModelParams,
    pub extra: PresetExtra,
    pub table: Option<Table>,
}

impl KineticsSpec {
    pub fn build(&self) -> Result<Kinetics, KineticsError> {
        match (self.preset, &self.table) {
            (Preset::Tabulated, Some(table)) => Kinetics::tabulated(self.params, table.clone()),
            _ => Kinetics::make(self.preset, self.params, self.extra),
        }
    }
}

fn param_error(e: ParamError) -> ConfigError {
    match e {
        ParamError::Invalid { name, value, reason } => {
            ConfigError::invalid(format!("kinetics.{name}"), format!("{value} {reason}"))
        }
        ParamError::Dimension(n) => ConfigError::invalid("grid.dim", format!("{n} is not a valid dimension")),
    }
}

fn kinetics_error(e: KineticsError) -> ConfigError {
    match e {
        KineticsError::Params(p) => param_error(p),
        KineticsError::CubicParameter(_) => ConfigError::invalid("kinetics.b", e),
        KineticsError::GrowthRate(_) => ConfigError::invalid("kinetics.r", e),
        other => ConfigError::invalid("kinetics.preset", other),
    }
}

fn sim_error(e: SimError) -> ConfigError {
    match e {
        SimError::Control { name, reason } => ConfigError::invalid(format!("run.{name}"), reason),
        other => ConfigError::invalid("init", other),
    }
}

fn read_grid(ini: &Ini) -> Result<Grid, ConfigError> {
    let dim = ini.usize_or("grid", "dim", 1)?;
    let lx = ini.f64_or("grid", "lx", 1.0)?;
    let nx = ini.usize_or("grid", "nx", 64)?;
    match dim {
        1 => Grid::line(lx, nx),
        2 => {
            let ly = ini.f64_or("grid", "ly", lx)?;
            let ny = ini.usize_or("grid", "ny", nx)?;
            Grid::rectangle(lx, ly, nx, ny)
        }
        _ => return Err(ConfigError::invalid("grid.dim", format!("{dim} (supported: 1, 2)"))),
    }
    .map_err(|e| ConfigError::invalid("grid", e))
}

fn read_kinetics(ini: &Ini, n: u32) -> Result<KineticsSpec, ConfigError> {
    let k = "kinetics";
    let preset: Preset = match ini.get(k, "preset") {
        None => Preset::PowerLaw,
        Some("tabulated") => Preset::Tabulated,
        Some(name) => name.parse().map_err(|e: String| ConfigError::invalid("kinetics.preset", e))?,
    };
    let params = ModelParams::new(
        n,
        ini.f64_or(k, "alpha", 0.0)?,
        ini.f64_or(k, "beta", 1.0)?,
        ini.f64_or(k, "gamma", 2.0)?,
        ini.f64_or(k, "a", 0.0)?,
        ini.f64_or(k, "mu", 1.0)?,
        ini.f64_or(k, "m1", 1.0)?,
        ini.f64_or(k, "m2", 1.0)?,
    )
    .map_err(param_error)?;
    let extra = PresetExtra {
        r: ini.f64_or(k, "r", 0.0)?,
        b: ini.f64_or(k, "b", PresetExtra::default().b)?,
    };
    let table = if preset == Preset::Tabulated {
        let col = |key| ini.list_or(k, key, &[]);
        let t = Table::new(col("table_u")?, col("table_d")?, col("table_s")?, col("table_f")?)
            .map_err(|e| ConfigError::invalid("kinetics.table_u", e))?;
        Some(t)
    } else {
        None
    };
    let spec = KineticsSpec {
        preset,
        params,
        extra,
        table,
    };
    spec.build().map_err(kinetics_error)?;
    Ok(spec)
}

fn read_init(ini: &Ini) -> Result<InitialData, ConfigError> {
    let s = "init";
    let mean = ini.f64_or(s, "mean", 1.0)?;
    let profile = match ini.get(s, "profile").unwrap_or("cosine") {
        "constant" => Profile::Constant(mean),
        "cosine" => {
            let mode = ini.usize_or(s, "mode", 1)?;
            Profile::Cosine {
                mean,
                amplitude: ini.f64_or(s, "amplitude", 0.1)?,
                mode: u32::try_from(mode).map_err(|_| ConfigError::invalid("init.mode", "too large"))?,
            }
        }
        "gaussian" => Profile::Gaussian {
            base: ini.f64_or(s, "base", 0.0)?,
            peak: ini.f64_or(s, "peak", 1.0)?,
            center: [ini.f64_or(s, "cx", 0.5)?, ini.f64_or(s, "cy", 0.5)?],
            width: ini.f64_or(s, "width", 0.1)?,
        },
        "random" => Profile::Random {
            u_max: ini.f64_or(s, "u_max", 1.0)?,
            seed: ini
                .get("run", "seed")
                .map(|v| v.parse::<u64>())
                .transpose()
                .map_err(|_| ConfigError::invalid("run.seed", "not a non-negative integer"))?
                .unwrap_or(0),
        },
        other => {
            return Err(ConfigError::invalid(
                "init.profile",
                format!("`{other}` (expected constant|cosine|gaussian|random)"),
            ))
        }
    };
    let v0 = match ini.get(s, "v0").unwrap_or("smooth") {
        "smooth" => InitialV::Smooth,
        "copy" => InitialV::Copy,
        value => InitialV::Value(parse_f64(value).map_err(|r| ConfigError::invalid("init.v0", r))?),
    };
    Ok(InitialData { profile, v0 })
}

fn read_run(ini: &Ini) -> Result<(RunControls, DiagnosticsConfig), ConfigError> {
    let r = "run";
    let d = RunControls::default();
    let controls = RunControls {
        t_end: ini.f64_or(r, "t_end", d.t_end)?,
        u_cap: ini.f64_or(r, "u_cap", d.u_cap)?,
        dt_max: ini.f64_or(r, "dt_max", d.dt_max)?,
        sigma: ini.f64_or(r, "sigma", d.sigma)?,
        record_every: ini.f64_or(r, "record_every", d.record_every)?,
        snapshot_times: ini.list_or(r, "snapshots", &[])?,
    };
    controls.validate().map_err(sim_error)?;
    let dd = DiagnosticsConfig::default();
    let diagnostics = DiagnosticsConfig {
        lp: ini.list_or(r, "lp", &dd.lp)?,
        ls: ini.list_or(r, "ls", &dd.ls)?,
        energy_p: ini.f64_or(r, "energy_p", dd.energy_p)?,
        energy_q: ini.f64_or(r, "energy_q", dd.energy_q)?,
    };
    diagnostics.validate().map_err(|e| ConfigError::invalid("run", e))?;
    Ok((controls, diagnostics))
}

fn read_axis(ini: &Ini, which: &str, default: SweepAxis) -> Result<AxisRange, ConfigError> {
    let key = |suffix: &str| format!("{which}{suffix}");
    let axis = match ini.get("sweep", which) {
        None => default,
        Some(name) => name
            .parse()
            .map_err(|e: String| ConfigError::invalid(format!("sweep.{which}"), e))?,
    };
    let range = AxisRange {
        axis,
        min: ini.f64_or("sweep", &key("_min"), 0.0)?,
        max: ini.f64_or("sweep", &key("_max"), 1.0)?,
        steps: ini.usize_or("sweep", &key("_steps"), 2)?,
    };
    range
        .validate()
        .map_err(|reason| ConfigError::invalid(format!("sweep.{which}"), reason))?;
    Ok(range)
}

/// A parsed file: a single run or a sweep (when a `[sweep]` section is present).
#[derive(Debug, Clone, PartialEq)]
pub enum Config {
    Sim(SimConfig),
    Sweep(SweepConfig),
}

/// A single run plus the kinetics description it was built from.
pub fn sim_from_ini(ini: &Ini) -> Result<(SimConfig, KineticsSpec), ConfigError> {
    let grid = read_grid(ini)?;
    let spec = read_kinetics(ini, grid.dim() as u32)?;
    let kinetics = spec.build().map_err(kinetics_error)?;
    let init = read_init(ini)?;
    let (controls, diagnostics) = read_run(ini)?;
    Ok((SimConfig::new(grid, kinetics, init, controls, diagnostics), spec))
}

pub fn config_from_ini(ini: &Ini) -> Result<Config, ConfigError> {
    let (sim, spec) = sim_from_ini(ini)?;
    if !ini.has_section("sweep") {
        return Ok(Config::Sim(sim));
    }
    let axes = [
        read_axis(ini, "axis1", SweepAxis::Beta)?,
        read_axis(ini, "axis2", SweepAxis::Gamma)?,
    ];
    if axes[0].axis == axes[1].axis {
        return Err(ConfigError::invalid("sweep.axis2", "axes must differ"));
    }
    let workers = match ini.usize_or("sweep", "workers", 0)? {
        0 => None,
        w => Some(w),
    };
    let ratio = ini.f64_or("sweep", "plateau_ratio", PlateauPolicy::default().ratio)?;
    if !(ratio >= 1.0 && ratio.is_finite()) {
        return Err(ConfigError::invalid("sweep.plateau_ratio", "must be finite and >= 1"));
    }
    Ok(Config::Sweep(SweepConfig {
        axes,
        kinetics: spec,
        template: sim,
        workers,
        policy: PlateauPolicy { ratio },
    }))
}

/// Parses and validates a configuration, applying `section.key=value` overrides.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<Config, ConfigError> {
    let mut ini = Ini::parse(text)?;
    for o in overrides {
        ini.apply_override(o)?;
    }
    config_from_ini(&ini)
}

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    parse_config_with(text, &[])
}
