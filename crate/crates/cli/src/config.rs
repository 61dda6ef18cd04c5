//! Scenario files: one JSON object per run.
//!
//! ```json
//! { "kind": "qi_roc", "seed": 7, "parallelism": 4, "output_dir": "out",
//!   "parameters": { "signal_photons": 0.01, "n_background": 10 } }
//! ```
//!
//! Every physical quantity carries its unit in the key name. Unknown keys are
//! errors, and all problems in a file are reported together.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use num_complex::Complex64;
use qradar_core::channel::{
    ThermalProfile, FIG10_DISTANCE, FIG10_KAPPA_ATM, FIG10_KAPPA_T, FIG10_TARGET_DEPTH,
};
use qradar_core::eom::{CouplingLayout, EomAxis, EomParams, ModePair, SPEED_OF_LIGHT};
use qradar_core::jpa::{AmplifierParams, FieldSolve, JpaParams};
use qradar_core::oe::{OeLayout, OeParams};
use qradar_core::receiver::Detector;
use serde_json::{Map, Value};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    EomSweep,
    OeSweep,
    OeEndToEnd,
    JpaGain,
    JpaWigner,
    ChannelNeff,
    QiRoc,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::EomSweep,
        Kind::OeSweep,
        Kind::OeEndToEnd,
        Kind::JpaGain,
        Kind::JpaWigner,
        Kind::ChannelNeff,
        Kind::QiRoc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::EomSweep => "eom_sweep",
            Kind::OeSweep => "oe_sweep",
            Kind::OeEndToEnd => "oe_end_to_end",
            Kind::JpaGain => "jpa_gain",
            Kind::JpaWigner => "jpa_wigner",
            Kind::ChannelNeff => "channel_neff",
            Kind::QiRoc => "qi_roc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// Dotted location, e.g. `parameters.model.kappa_c_rad_s`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    pub t_max: f64,
    pub resolution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EomSweep {
    pub model: EomParams,
    pub axis: EomAxis,
    pub grid: Vec<f64>,
    pub threshold: Option<(ModePair, Threshold)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OeAxis {
    DeltaEg,
    Temperature,
    MuC,
}

impl OeAxis {
    pub fn column(self) -> &'static str {
        match self {
            OeAxis::DeltaEg => "delta_eg_rad_s",
            OeAxis::Temperature => "temperature_k",
            OeAxis::MuC => "mu_c",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OeSweep {
    pub model: OeParams,
    pub axis: OeAxis,
    pub grid: Vec<f64>,
    pub threshold: Option<Threshold>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub kappa_atm: f64,
    pub distance: f64,
    pub kappa_t: f64,
    pub target_depth: f64,
    pub n_env: f64,
    pub n_target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OeEndToEnd {
    pub model: OeParams,
    pub link: Link,
    pub temperatures: Vec<f64>,
    pub threshold: Option<Threshold>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AmplifierSource {
    Direct(AmplifierParams),
    Pump(JpaParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct JpaGain {
    pub source: AmplifierSource,
    pub omegas: Vec<f64>,
    /// Pump strengths `|λ₁|` (rad/s) for the on-resonance gain curve.
    pub pump_scan: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JpaWigner {
    pub gains: Vec<f64>,
    pub phase: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelNeff {
    pub profile: ThermalProfile,
    pub lengths: Vec<f64>,
    pub quadrature_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QiRoc {
    pub squeezing: f64,
    pub reflectivity: f64,
    pub n_background: f64,
    pub samples_per_decision: usize,
    pub n_decisions: usize,
    pub detector: Detector,
    pub heterodyne: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parameters {
    EomSweep(EomSweep),
    OeSweep(OeSweep),
    OeEndToEnd(OeEndToEnd),
    JpaGain(JpaGain),
    JpaWigner(JpaWigner),
    ChannelNeff(ChannelNeff),
    QiRoc(QiRoc),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: Kind,
    pub seed: u64,
    pub parallelism: usize,
    pub output_dir: Option<PathBuf>,
    pub parameters: Parameters,
    /// The configuration with every default filled in, echoed into summaries.
    pub resolved: Value,
}

#[derive(Clone, Copy)]
enum Bound {
    Finite,
    NonNegative,
    Positive,
    OpenUnit,
}

impl Bound {
    fn check(self, v: f64) -> Option<&'static str> {
        let ok = v.is_finite()
            && match self {
                Bound::Finite => true,
                Bound::NonNegative => v >= 0.0,
                Bound::Positive => v > 0.0,
                Bound::OpenUnit => (0.0..1.0).contains(&v),
            };
        if ok {
            return None;
        }
        Some(match self {
            Bound::Finite => "must be a finite number",
            Bound::NonNegative => "must be finite and ≥ 0",
            Bound::Positive => "must be finite and > 0",
            Bound::OpenUnit => "must lie in [0, 1)",
        })
    }
}

struct Table<'a> {
    path: String,
    map: Map<String, Value>,
    seen: BTreeSet<&'static str>,
    resolved: Map<String, Value>,
    errors: &'a mut Vec<ConfigError>,
}

impl<'a> Table<'a> {
    fn new(path: String, value: &Value, errors: &'a mut Vec<ConfigError>) -> Self {
        let map = match value {
            Value::Object(m) => m.clone(),
            _ => {
                errors.push(ConfigError {
                    path: path.clone(),
                    message: "expected an object".into(),
                });
                Map::new()
            }
        };
        Self {
            path,
            map,
            seen: BTreeSet::new(),
            resolved: Map::new(),
            errors,
        }
    }

    fn at(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn error(&mut self, key: &str, message: impl Into<String>) {
        let path = self.at(key);
        self.errors.push(ConfigError {
            path,
            message: message.into(),
        });
    }

    fn take(&mut self, key: &'static str) -> Option<Value> {
        self.seen.insert(key);
        self.map.get(key).cloned()
    }

    fn number(&mut self, key: &'static str, default: Option<f64>, bound: Bound) -> f64 {
        let v = match (self.take(key), default) {
            (Some(Value::Number(n)), _) => n.as_f64().unwrap_or(f64::NAN),
            (Some(_), _) => {
                self.error(key, "expected a number");
                return f64::NAN;
            }
            (None, Some(d)) => d,
            (None, None) => {
                self.error(key, "missing required key");
                return f64::NAN;
            }
        };
        if let Some(msg) = bound.check(v) {
            self.error(key, format!("{msg}, got {v}"));
        }
        self.resolved.insert(key.into(), number_value(v));
        v
    }

    fn optional_number(&mut self, key: &'static str, bound: Bound) -> Option<f64> {
        if self.map.contains_key(key) {
            Some(self.number(key, None, bound))
        } else {
            self.seen.insert(key);
            None
        }
    }

    fn integer(&mut self, key: &'static str, default: Option<u64>, min: u64) -> u64 {
        let v = match (self.take(key), default) {
            (Some(Value::Number(n)), _) => match n.as_u64() {
                Some(v) => v,
                None => {
                    self.error(key, format!("expected a non-negative integer, got {n}"));
                    return min;
                }
            },
            (Some(_), _) => {
                self.error(key, "expected an integer");
                return min;
            }
            (None, Some(d)) => d,
            (None, None) => {
                self.error(key, "missing required key");
                return min;
            }
        };
        if v < min {
            self.error(key, format!("must be ≥ {min}, got {v}"));
        }
        self.resolved.insert(key.into(), Value::from(v));
        v
    }

    fn boolean(&mut self, key: &'static str, default: bool) -> bool {
        let v = match self.take(key) {
            Some(Value::Bool(b)) => b,
            Some(_) => {
                self.error(key, "expected true or false");
                default
            }
            None => default,
        };
        self.resolved.insert(key.into(), Value::Bool(v));
        v
    }

    fn string(&mut self, key: &'static str) -> Option<String> {
        match self.take(key) {
            Some(Value::String(s)) => {
                self.resolved.insert(key.into(), Value::String(s.clone()));
                Some(s)
            }
            Some(_) => {
                self.error(key, "expected a string");
                None
            }
            None => None,
        }
    }

    fn choice(
        &mut self,
        key: &'static str,
        options: &[&'static str],
        default: Option<&'static str>,
    ) -> &'static str {
        let fallback = default.unwrap_or(options[0]);
        let given = match self.string(key) {
            Some(s) => s,
            None if self.map.contains_key(key) => return fallback,
            None => match default {
                Some(d) => d.to_string(),
                None => {
                    self.error(
                        key,
                        format!("missing required key (one of {})", options.join(", ")),
                    );
                    return fallback;
                }
            },
        };
        match options.iter().find(|o| **o == given) {
            Some(o) => {
                self.resolved
                    .insert(key.into(), Value::String(o.to_string()));
                o
            }
            None => {
                let hint = suggestion(&given, options.iter().copied());
                self.error(
                    key,
                    format!(
                        "unknown value \"{given}\"; expected one of {}{hint}",
                        options.join(", ")
                    ),
                );
                fallback
            }
        }
    }

    fn numbers(&mut self, key: &'static str, bound: Bound, required: bool) -> Option<Vec<f64>> {
        match self.take(key) {
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    match item.as_f64() {
                        Some(v) => {
                            if let Some(msg) = bound.check(v) {
                                self.error(&format!("{key}[{i}]"), format!("{msg}, got {v}"));
                            }
                            out.push(v);
                        }
                        None => self.error(&format!("{key}[{i}]"), "expected a number"),
                    }
                }
                if out.is_empty() {
                    self.error(key, "must not be empty");
                }
                self.resolved.insert(
                    key.into(),
                    Value::Array(out.iter().map(|v| number_value(*v)).collect()),
                );
                Some(out)
            }
            Some(_) => {
                self.error(key, "expected an array of numbers");
                None
            }
            None => {
                if required {
                    self.error(key, "missing required key");
                }
                None
            }
        }
    }

    /// Either an explicit array or `{"start": a, "stop": b, "points": n}`.
    fn grid(&mut self, key: &'static str, bound: Bound) -> Vec<f64> {
        match self.map.get(key) {
            Some(Value::Object(_)) => {
                let value = self.take(key).unwrap_or(Value::Null);
                let path = self.at(key);
                let mut sub = Table::new(path, &value, self.errors);
                let start = sub.number("start", None, bound);
                let stop = sub.number("stop", None, bound);
                let points = sub.integer("points", None, 1) as usize;
                let resolved = sub.finish();
                self.resolved.insert(key.into(), resolved);
                match points {
                    0 => Vec::new(),
                    1 => vec![start],
                    n => (0..n)
                        .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
                        .collect(),
                }
            }
            _ => self.numbers(key, bound, true).unwrap_or_default(),
        }
    }

    /// Nested table; an absent key reads as an empty table so defaults apply.
    fn section(&mut self, key: &'static str) -> Table<'_> {
        let value = self.take(key).unwrap_or_else(|| Value::Object(Map::new()));
        let path = self.at(key);
        Table::new(path, &value, self.errors)
    }

    fn sub(&mut self, key: &'static str) -> Option<Table<'_>> {
        let value = self.take(key)?;
        let path = self.at(key);
        Some(Table::new(path, &value, self.errors))
    }

    fn put(&mut self, key: &'static str, value: Value) {
        self.resolved.insert(key.into(), value);
    }

    /// Reports keys that were never read, with the closest known key.
    fn finish(self) -> Value {
        let Table {
            path,
            map,
            seen,
            resolved,
            errors,
        } = self;
        for key in map.keys() {
            if !seen.contains(key.as_str()) {
                let hint = suggestion(key, seen.iter().copied());
                let full = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                errors.push(ConfigError {
                    path: full,
                    message: format!("unknown key{hint}"),
                });
            }
        }
        Value::Object(resolved)
    }
}

fn number_value(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

fn suggestion<'s>(given: &str, candidates: impl Iterator<Item = &'s str>) -> String {
    candidates
        .map(|c| (strsim::levenshtein(given, c), c))
        .filter(|(d, c)| *d <= 3.max(c.len() / 3))
        .min()
        .map(|(_, c)| format!(" (did you mean \"{c}\"?)"))
        .unwrap_or_default()
}

/// Parses and validates a scenario file.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigErrors> {
    let root: Value = serde_json::from_str(text).map_err(|e| {
        ConfigErrors(vec![ConfigError {
            path: String::new(),
            message: format!(
                "syntax error at line {}, column {}: {e}",
                e.line(),
                e.column()
            ),
        }])
    })?;
    let mut errors = Vec::new();
    let mut top = Table::new(String::new(), &root, &mut errors);
    if let Some(v) = top.optional_number("format_version", Bound::Positive) {
        if v != FORMAT_VERSION as f64 {
            top.error(
                "format_version",
                format!("unsupported version {v}; this build reads {FORMAT_VERSION}"),
            );
        }
    }
    top.put("format_version", Value::from(FORMAT_VERSION));
    let names: Vec<&'static str> = Kind::ALL.iter().map(|k| k.name()).collect();
    let kind_name = top.choice("kind", &names, None);
    let kind = Kind::ALL
        .into_iter()
        .find(|k| k.name() == kind_name)
        .unwrap_or(Kind::QiRoc);
    let seed = top.integer("seed", Some(0), 0);
    let parallelism = top.integer("parallelism", Some(1), 1) as usize;
    let output_dir = top.string("output_dir").map(PathBuf::from);
    let params_value = top
        .take("parameters")
        .unwrap_or_else(|| Value::Object(Map::new()));
    let (parameters, resolved_params) = {
        let mut p = Table::new("parameters".into(), &params_value, top.errors);
        let parsed = match kind {
            Kind::EomSweep => Parameters::EomSweep(eom_sweep(&mut p)),
            Kind::OeSweep => Parameters::OeSweep(oe_sweep(&mut p)),
            Kind::OeEndToEnd => Parameters::OeEndToEnd(oe_end_to_end(&mut p)),
            Kind::JpaGain => Parameters::JpaGain(jpa_gain(&mut p)),
            Kind::JpaWigner => Parameters::JpaWigner(jpa_wigner(&mut p)),
            Kind::ChannelNeff => Parameters::ChannelNeff(channel_neff(&mut p)),
            Kind::QiRoc => Parameters::QiRoc(qi_roc(&mut p)),
        };
        (parsed, p.finish())
    };
    top.put("parameters", resolved_params);
    let resolved = top.finish();
    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    Ok(ScenarioConfig {
        kind,
        seed,
        parallelism,
        output_dir,
        parameters,
        resolved,
    })
}

fn threshold(t: &mut Table, default_max: f64) -> Threshold {
    let t_max = t.number("t_max_k", Some(default_max), Bound::Positive);
    let resolution = t.number("resolution_k", Some(1e-3), Bound::Positive);
    Threshold { t_max, resolution }
}

fn eom_model(mut t: Table) -> (EomParams, Value) {
    let r = EomParams::reference();
    let wavelength = t.number("wavelength_m", Some(r.wavelength()), Bound::Positive);
    let layout = match t.choice("layout", &["reciprocal", "printed"], Some("reciprocal")) {
        "printed" => CouplingLayout::Printed,
        _ => CouplingLayout::Reciprocal,
    };
    let p = EomParams {
        omega_c: 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / wavelength,
        omega_m: t.number("omega_m_rad_s", Some(r.omega_m), Bound::Positive),
        omega_w: t.number("omega_w_rad_s", Some(r.omega_w), Bound::Positive),
        kappa_c: t.number("kappa_c_rad_s", Some(r.kappa_c), Bound::NonNegative),
        gamma_m: t.number("gamma_m_rad_s", Some(r.gamma_m), Bound::NonNegative),
        kappa_w: t.number("kappa_w_rad_s", Some(r.kappa_w), Bound::NonNegative),
        delta_c: t.number("delta_c_rad_s", Some(r.delta_c), Bound::Finite),
        delta_w: t.number("delta_w_rad_s", Some(r.delta_w), Bound::Finite),
        g1: t.number("g1_rad_s", Some(r.g1), Bound::NonNegative),
        g2: t.number("g2", Some(r.g2), Bound::NonNegative),
        e_c: t.number("e_c_rad_s", Some(r.e_c), Bound::NonNegative),
        e_w: t.number("e_w_rad_s", Some(r.e_w), Bound::NonNegative),
        temperature: t.number("temperature_k", Some(r.temperature), Bound::NonNegative),
        layout,
    };
    (p, t.finish())
}

fn oe_model(mut t: Table) -> (OeParams, Value) {
    let r = OeParams::reference();
    let wavelength = t.number(
        "wavelength_m",
        Some(2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / r.omega_c),
        Bound::Positive,
    );
    let layout = match t.choice("layout", &["reciprocal", "printed"], Some("reciprocal")) {
        "printed" => OeLayout::Printed,
        _ => OeLayout::Reciprocal,
    };
    let mu_c = t.number("mu_c", Some(r.mu_c), Bound::Positive);
    let g_wp = t.number(
        "g_wp_rad_s",
        Some(r.g_wp * mu_c / r.mu_c),
        Bound::NonNegative,
    );
    let p = OeParams {
        omega_c: 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / wavelength,
        omega_w: t.number("omega_w_rad_s", Some(r.omega_w), Bound::Positive),
        delta_c: t.number("delta_c_rad_s", Some(r.delta_c), Bound::Finite),
        delta_w: t.number("delta_w_rad_s", Some(r.delta_w), Bound::Finite),
        delta_eg: t.number("delta_eg_rad_s", Some(r.delta_eg), Bound::Finite),
        kappa_c: t.number("kappa_c_rad_s", Some(r.kappa_c), Bound::NonNegative),
        kappa_w: t.number("kappa_w_rad_s", Some(r.kappa_w), Bound::NonNegative),
        gamma_p: t.number("gamma_p_rad_s", Some(r.gamma_p), Bound::NonNegative),
        g_op: t.number("g_op_rad_s", Some(r.g_op), Bound::NonNegative),
        g_wp,
        mu_c,
        temperature: t.number("temperature_k", Some(r.temperature), Bound::NonNegative),
        e_c: t.number("e_c_rad_s", Some(r.e_c), Bound::NonNegative),
        e_w: t.number("e_w_rad_s", Some(r.e_w), Bound::NonNegative),
        layout,
    };
    (p, t.finish())
}

fn optional_threshold(p: &mut Table, default_max: f64) -> Option<Threshold> {
    let mut t = p.sub("threshold")?;
    let th = threshold(&mut t, default_max);
    let v = t.finish();
    p.put("threshold", v);
    Some(th)
}

fn eom_sweep(p: &mut Table) -> EomSweep {
    let (model, v) = eom_model(p.section("model"));
    p.put("model", v);
    let (axis, bound) = match p.choice(
        "axis",
        &["temperature_k", "wavelength_m", "gamma_m_rad_s"],
        Some("temperature_k"),
    ) {
        "wavelength_m" => (EomAxis::Wavelength, Bound::Positive),
        "gamma_m_rad_s" => (EomAxis::GammaM, Bound::NonNegative),
        _ => (EomAxis::Temperature, Bound::NonNegative),
    };
    let grid = p.grid("grid", bound);
    let threshold = match p.sub("threshold") {
        Some(mut t) => {
            let pair = match t.choice("pair", &["oc_mc", "oc_mr", "mr_mc"], Some("oc_mc")) {
                "oc_mr" => ModePair::OcMr,
                "mr_mc" => ModePair::MrMc,
                _ => ModePair::OcMc,
            };
            let th = threshold(&mut t, 5.0);
            let v = t.finish();
            p.put("threshold", v);
            Some((pair, th))
        }
        None => None,
    };
    EomSweep {
        model,
        axis,
        grid,
        threshold,
    }
}

fn oe_sweep(p: &mut Table) -> OeSweep {
    let (model, v) = oe_model(p.section("model"));
    p.put("model", v);
    let (axis, bound) = match p.choice(
        "axis",
        &["delta_eg_rad_s", "temperature_k", "mu_c"],
        Some("delta_eg_rad_s"),
    ) {
        "temperature_k" => (OeAxis::Temperature, Bound::NonNegative),
        "mu_c" => (OeAxis::MuC, Bound::Positive),
        _ => (OeAxis::DeltaEg, Bound::Finite),
    };
    let grid = p.grid("grid", bound);
    let threshold = optional_threshold(p, 20.0);
    OeSweep {
        model,
        axis,
        grid,
        threshold,
    }
}

fn oe_end_to_end(p: &mut Table) -> OeEndToEnd {
    let (model, v) = oe_model(p.section("model"));
    p.put("model", v);
    let link = {
        let mut t = p.section("link");
        let link = Link {
            kappa_atm: t.number("kappa_atm_per_m", Some(FIG10_KAPPA_ATM), Bound::NonNegative),
            distance: t.number("distance_m", Some(FIG10_DISTANCE), Bound::NonNegative),
            kappa_t: t.number("kappa_t_per_m", Some(FIG10_KAPPA_T), Bound::NonNegative),
            target_depth: t.number("target_depth_m", Some(FIG10_TARGET_DEPTH), Bound::Positive),
            n_env: t.number("n_env", Some(0.0), Bound::NonNegative),
            n_target: t.number("n_target", Some(0.0), Bound::NonNegative),
        };
        let resolved = t.finish();
        p.put("link", resolved);
        link
    };
    let temperatures = p.grid("temperatures_k", Bound::NonNegative);
    let threshold = optional_threshold(p, 20.0);
    OeEndToEnd {
        model,
        link,
        temperatures,
        threshold,
    }
}

fn jpa_gain(p: &mut Table) -> JpaGain {
    let has_amp = p.map.contains_key("amplifier");
    let has_pump = p.map.contains_key("pump");
    if has_amp == has_pump {
        p.error("amplifier", "give exactly one of \"amplifier\" or \"pump\"");
    }
    let source = if has_pump {
        let mut t = p.section("pump");
        let e_j = t.number("e_j_j", None, Bound::Positive);
        let capacitance = t.number("capacitance_f", None, Bound::Positive);
        let kappa = t.number("kappa_rad_s", None, Bound::Positive);
        let omega_p = t.number("omega_p_rad_s", None, Bound::Positive);
        let epsilon = t.number("epsilon_rad_s", None, Bound::NonNegative);
        let solve = match t.choice(
            "field_solve",
            &["self_consistent", "linear"],
            Some("self_consistent"),
        ) {
            "linear" => FieldSolve::Linear,
            _ => FieldSolve::SelfConsistent,
        };
        let v = t.finish();
        p.put("pump", v);
        let circuit = qradar_core::jpa::derived_params(e_j, capacitance).ok();
        AmplifierSource::Pump(JpaParams {
            omega0: circuit.map_or(f64::NAN, |c| c.omega0),
            kerr: circuit.map_or(f64::NAN, |c| c.kerr),
            kappa,
            omega_p,
            epsilon: Complex64::new(epsilon, 0.0),
            solve,
        })
    } else {
        let mut t = p.section("amplifier");
        let kappa = t.number("kappa_rad_s", None, Bound::Positive);
        let lambda = t.number("lambda1_rad_s", None, Bound::NonNegative);
        let phase = t.number("lambda1_phase_rad", Some(0.0), Bound::Finite);
        let delta0 = t.number("delta0_rad_s", Some(0.0), Bound::Finite);
        let v = t.finish();
        p.put("amplifier", v);
        if lambda >= 0.5 * kappa {
            p.error(
                "amplifier.lambda1_rad_s",
                format!("must be below kappa/2 = {} (threshold)", 0.5 * kappa),
            );
        }
        AmplifierSource::Direct(AmplifierParams {
            delta0,
            lambda1: Complex64::from_polar(lambda, phase),
            kappa,
        })
    };
    let omegas = p.grid("omega_rad_s", Bound::Finite);
    let pump_scan = if p.map.contains_key("pump_scan_rad_s") {
        Some(p.grid("pump_scan_rad_s", Bound::NonNegative))
    } else {
        p.seen.insert("pump_scan_rad_s");
        None
    };
    JpaGain {
        source,
        omegas,
        pump_scan,
    }
}

fn jpa_wigner(p: &mut Table) -> JpaWigner {
    let gains = p
        .numbers("gains", Bound::NonNegative, true)
        .unwrap_or_default();
    for (i, g) in gains.iter().enumerate() {
        if *g >= 0.5 {
            p.error(
                &format!("gains[{i}]"),
                format!("g = {g} is at or above threshold 0.5"),
            );
        }
    }
    let phase = p.number("phase_rad", Some(0.0), Bound::Finite);
    let mut t = p.section("grid");
    let q_min = t.number("min", Some(-6.0), Bound::Finite);
    let q_max = t.number("max", Some(6.0), Bound::Finite);
    let step = t.number("step", Some(0.05), Bound::Positive);
    let resolved = t.finish();
    p.put("grid", resolved);
    if q_max <= q_min {
        p.error("grid", format!("max ({q_max}) must exceed min ({q_min})"));
    }
    JpaWigner {
        gains,
        phase,
        q_min,
        q_max,
        step,
    }
}

fn channel_neff(p: &mut Table) -> ChannelNeff {
    let mut t = p.section("profile");
    let profile = ThermalProfile {
        n_in: t.number("n_in", None, Bound::NonNegative),
        n_out: t.number("n_out", None, Bound::NonNegative),
        mu_in: t.number("mu_in_per_m", None, Bound::NonNegative),
        mu_out: t.number("mu_out_per_m", None, Bound::NonNegative),
        l0: t.number("l0_m", None, Bound::NonNegative),
        l: f64::NAN,
    };
    let resolved = t.finish();
    p.put("profile", resolved);
    let lengths = p.grid("length_m", Bound::Positive);
    let quadrature_points = p.integer("quadrature_points", Some(16), 1) as usize;
    ChannelNeff {
        profile,
        lengths,
        quadrature_points,
    }
}

fn qi_roc(p: &mut Table) -> QiRoc {
    let photons = p.optional_number("signal_photons", Bound::NonNegative);
    let squeezing = p.optional_number("squeezing_r", Bound::NonNegative);
    let squeezing = match (photons, squeezing) {
        (Some(n), None) => n.sqrt().asinh(),
        (None, Some(r)) => r,
        _ => {
            p.error(
                "signal_photons",
                "give exactly one of \"signal_photons\" or \"squeezing_r\"",
            );
            0.0
        }
    };
    p.put("squeezing_r", number_value(squeezing));
    QiRoc {
        squeezing,
        reflectivity: p.number("reflectivity", Some(0.5), Bound::OpenUnit),
        n_background: p.number("n_background", Some(10.0), Bound::NonNegative),
        samples_per_decision: p.integer("samples_per_decision", Some(2000), 1) as usize,
        n_decisions: p.integer("n_decisions", Some(10_000), 1) as usize,
        detector: match p.choice("detector", &["covariance", "energy"], Some("covariance")) {
            "energy" => Detector::Energy,
            _ => Detector::Covariance,
        },
        heterodyne: p.boolean("heterodyne", true),
    }
}
