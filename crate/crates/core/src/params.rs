//! Simulation parameters and unit conventions.
//!
//! Everything inside the engine is dimensionless: length is measured in
//! target radii (0.1 mm) and time in units of 4 s, which puts the
//! diffusivity at 0.25. [`TIME_UNIT_SECONDS`] converts to physical seconds.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{ConfigError, Violation};
use crate::torus::Point2;

/// Physical seconds per internal time unit.
pub const TIME_UNIT_SECONDS: f64 = 4.0;

pub const DEFAULT_NU: f64 = 0.25;
pub const DEFAULT_DELTA: f64 = 1.0;
pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_SHEAR_CUTOFF: f64 = 800.0;
pub const MIN_GRID_N: usize = 32;

/// Validated parameter bundle. Construct through [`validate_params`], or
/// start from [`SimParams::with_box`], mutate, and call [`SimParams::check`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    /// Torus side `L`.
    pub box_size: f64,
    /// Shear amplitude `A`.
    pub amplitude: f64,
    pub nu: f64,
    /// Chemical sensitivity.
    pub chi: f64,
    /// Maximal chemotactic speed, the sup of the cutoff function.
    pub v_max: f64,
    /// Target radius.
    pub delta: f64,
    /// Saturation bound on |A·u(y)|.
    pub shear_cutoff: f64,
    pub dt: f64,
    pub t_max: f64,
    pub grid_n: usize,
    pub start: Point2,
    /// Split fast drift increments so no substep moves more than δ/2.
    pub substep: bool,
    /// Accept grids coarser than δ/2.
    pub force_grid: bool,
}

impl SimParams {
    /// Defaults for a box of side `box_size`; other fields as documented in
    /// [`validate_params`].
    pub fn with_box(box_size: f64) -> Self {
        let delta = DEFAULT_DELTA;
        SimParams {
            box_size,
            amplitude: 0.0,
            nu: DEFAULT_NU,
            chi: 0.0,
            v_max: 0.0,
            delta,
            shear_cutoff: DEFAULT_SHEAR_CUTOFF,
            dt: DEFAULT_DT,
            t_max: default_t_max(box_size, delta, DEFAULT_NU),
            grid_n: default_grid_n(box_size, delta),
            start: Point2::new(0.0, 0.0),
            substep: true,
            force_grid: false,
        }
    }

    pub fn grid_spacing(&self) -> f64 {
        self.box_size / self.grid_n as f64
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.box_size / 2.0, self.box_size / 2.0)
    }

    /// Shear rate A/L in internal units (4 s)⁻¹.
    pub fn shear_rate(&self) -> f64 {
        self.amplitude / self.box_size
    }

    /// Shear rate in physical s⁻¹.
    pub fn shear_rate_per_second(&self) -> f64 {
        self.shear_rate() / TIME_UNIT_SECONDS
    }

    pub fn set_shear_rate(&mut self, rate: f64) {
        self.amplitude = rate * self.box_size;
    }

    pub fn set_shear_rate_per_second(&mut self, rate: f64) {
        self.set_shear_rate(rate * TIME_UNIT_SECONDS);
    }

    /// Re-check every invariant after direct field mutation.
    pub fn check(&self) -> Result<(), ConfigError> {
        let violations = invariant_violations(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { violations })
        }
    }

    /// The resolved parameters as `key = value` lines, in config-file syntax.
    pub fn to_config_lines(&self) -> Vec<String> {
        vec![
            format!("L = {}", self.box_size),
            format!("A = {}", self.amplitude),
            format!("nu = {}", self.nu),
            format!("chi = {}", self.chi),
            format!("v_max = {}", self.v_max),
            format!("delta = {}", self.delta),
            format!("shear_cutoff = {}", self.shear_cutoff),
            format!("dt = {}", self.dt),
            format!("t_max = {}", self.t_max),
            format!("grid_n = {}", self.grid_n),
            format!("start_x = {}", self.start.x),
            format!("start_y = {}", self.start.y),
            format!("substep = {}", self.substep),
            format!("force_grid = {}", self.force_grid),
            format!(
                "# shear_rate = {} (4s)^-1 = {} s^-1",
                self.shear_rate(),
                self.shear_rate_per_second()
            ),
        ]
    }
}

impl fmt::Display for SimParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_config_lines().join("\n"))
    }
}

/// Grid with four cells per target radius.
pub fn default_grid_n(box_size: f64, delta: f64) -> usize {
    if !(box_size.is_finite() && delta.is_finite()) || box_size <= 0.0 || delta <= 0.0 {
        return MIN_GRID_N;
    }
    ((4.0 * box_size / delta).ceil() as usize).max(MIN_GRID_N)
}

/// Ten times the largest pure-diffusion 1D hitting time (L/2 − δ)²/ν.
pub fn default_t_max(box_size: f64, delta: f64, nu: f64) -> f64 {
    let half = box_size / 2.0 - delta;
    10.0 * half * half / nu
}

/// Raw string-valued configuration, as read from a config file or flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

/// Every key understood by [`validate_params`].
pub const CONFIG_KEYS: &[&str] = &[
    "L",
    "A",
    "shear_rate",
    "shear_rate_per_s",
    "nu",
    "chi",
    "v_max",
    "delta",
    "shear_cutoff",
    "dt",
    "t_max",
    "grid_n",
    "start_x",
    "start_y",
    "substep",
    "force_grid",
];

impl RawConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.insert(key.into(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    /// Later entries win.
    pub fn merge(&mut self, other: &RawConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Parse a flat TOML document (`key = value` lines, `#` comments).
    /// Nested tables are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError {
            violations: vec![Violation {
                field: "<config>".into(),
                message: e.message().to_string(),
            }],
        })?;
        let mut raw = RawConfig::new();
        let mut violations = Vec::new();
        for (key, value) in table {
            let text = match value {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                other => {
                    violations.push(Violation {
                        field: key.clone(),
                        message: format!("expected a scalar, found {}", other.type_str()),
                    });
                    continue;
                }
            };
            raw.entries.insert(key, text);
        }
        if violations.is_empty() {
            Ok(raw)
        } else {
            Err(ConfigError { violations })
        }
    }
}

impl<K: Into<String>, V: ToString> FromIterator<(K, V)> for RawConfig {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        let mut raw = RawConfig::new();
        for (k, v) in iter {
            raw.set(k, v);
        }
        raw
    }
}

struct Reader<'a> {
    raw: &'a RawConfig,
    violations: Vec<Violation>,
}

impl Reader<'_> {
    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        let text = self.raw.get(key)?;
        match text.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            Ok(_) => {
                self.push(key, "must be finite");
                None
            }
            Err(_) => {
                self.push(key, format!("not a number: {text:?}"));
                None
            }
        }
    }

    fn integer(&mut self, key: &str) -> Option<usize> {
        let text = self.raw.get(key)?;
        match text.trim().parse::<usize>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.push(key, format!("not a non-negative integer: {text:?}"));
                None
            }
        }
    }

    fn flag(&mut self, key: &str) -> Option<bool> {
        let text = self.raw.get(key)?;
        match text.trim() {
            "true" | "1" | "yes" => Some(true),
            "false" | "0" | "no" => Some(false),
            other => {
                self.push(key, format!("not a boolean: {other:?}"));
                None
            }
        }
    }
}

/// Resolve a raw key-value map into [`SimParams`].
///
/// Only `L` is required. Defaults: `nu = 0.25`, `delta = 1`, `dt = 0.01`,
/// `shear_cutoff = 800`, `A = chi = v_max = 0`, `start = (0, 0)`,
/// `grid_n = ceil(4L/delta)`, `t_max = 10 (L/2 − delta)² / nu`.
/// The amplitude may be given directly (`A`), as an internal shear rate
/// (`shear_rate`, A/L) or as a physical one (`shear_rate_per_s`); at most one.
///
/// All problems are collected into a single [`ConfigError`].
pub fn validate_params(raw: &RawConfig) -> Result<SimParams, ConfigError> {
    let mut r = Reader { raw, violations: Vec::new() };

    for (key, _) in raw.iter() {
        if !CONFIG_KEYS.contains(&key) {
            r.push(key, "unknown key");
        }
    }

    let box_size = r.float("L");
    if raw.get("L").is_none() {
        r.push("L", "required");
    }
    let nu = r.float("nu").unwrap_or(DEFAULT_NU);
    let delta = r.float("delta").unwrap_or(DEFAULT_DELTA);
    let box_size_or_nan = box_size.unwrap_or(f64::NAN);

    let amplitude_keys: Vec<&str> = ["A", "shear_rate", "shear_rate_per_s"]
        .into_iter()
        .filter(|k| raw.get(k).is_some())
        .collect();
    if amplitude_keys.len() > 1 {
        r.push("A", format!("conflicting amplitude keys: {}", amplitude_keys.join(", ")));
    }
    let amplitude = if let Some(a) = r.float("A") {
        a
    } else if let Some(rate) = r.float("shear_rate") {
        rate * box_size_or_nan
    } else if let Some(rate) = r.float("shear_rate_per_s") {
        rate * TIME_UNIT_SECONDS * box_size_or_nan
    } else {
        0.0
    };

    let params = SimParams {
        box_size: box_size_or_nan,
        amplitude,
        nu,
        chi: r.float("chi").unwrap_or(0.0),
        v_max: r.float("v_max").unwrap_or(0.0),
        delta,
        shear_cutoff: r.float("shear_cutoff").unwrap_or(DEFAULT_SHEAR_CUTOFF),
        dt: r.float("dt").unwrap_or(DEFAULT_DT),
        t_max: r
            .float("t_max")
            .unwrap_or_else(|| default_t_max(box_size_or_nan, delta, nu)),
        grid_n: r
            .integer("grid_n")
            .unwrap_or_else(|| default_grid_n(box_size_or_nan, delta)),
        start: Point2::new(
            r.float("start_x").unwrap_or(0.0),
            r.float("start_y").unwrap_or(0.0),
        ),
        substep: r.flag("substep").unwrap_or(true),
        force_grid: r.flag("force_grid").unwrap_or(false),
    };

    let mut violations = r.violations;
    if box_size.is_some() {
        violations.extend(invariant_violations(&params));
    }
    if violations.is_empty() {
        Ok(params)
    } else {
        Err(ConfigError { violations })
    }
}

fn invariant_violations(p: &SimParams) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut fail = |field: &str, message: &str| {
        out.push(Violation {
            field: field.into(),
            message: message.into(),
        })
    };
    // Comparisons are written so that NaN fails them.
    if !(p.delta > 0.0) {
        fail("delta", "delta > 0 violated");
    }
    if !(p.box_size > 2.0 * p.delta) {
        fail("L", "L > 2·delta violated");
    }
    if !(p.nu > 0.0) {
        fail("nu", "nu > 0 violated");
    }
    if !(p.dt > 0.0) {
        fail("dt", "dt > 0 violated");
    }
    if !(p.t_max > p.dt) {
        fail("t_max", "t_max > dt violated");
    }
    if p.grid_n < MIN_GRID_N {
        fail("grid_n", "grid_n ≥ 32 violated");
    }
    if !(p.amplitude >= 0.0) {
        fail("A", "A ≥ 0 violated");
    }
    if !(p.chi >= 0.0) {
        fail("chi", "chi ≥ 0 violated");
    }
    if !(p.v_max >= 0.0) {
        fail("v_max", "v_max ≥ 0 violated");
    }
    if !(p.shear_cutoff > 0.0) {
        fail("shear_cutoff", "shear_cutoff > 0 violated");
    }
    if !p.force_grid && p.grid_n > 0 && !(p.grid_spacing() <= p.delta / 2.0) {
        fail("grid_n", "h ≤ delta/2 violated");
    }
    if !(p.start.x.is_finite() && p.start.y.is_finite()) {
        fail("start", "start must be finite");
    }
    out
}
