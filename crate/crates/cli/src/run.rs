//! Executes a parsed scenario and writes its artifacts.
//!
//! Every run writes kind-specific CSV files and `summary.json` into the
//! output directory. Numbers in CSV use 17 significant digits; rows follow
//! grid order regardless of thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qradar_core::channel::{
    attenuation_channel, n_eff_closed, n_eff_general_step, round_trip, target_channel,
};
use qradar_core::criteria::two_eta;
use qradar_core::eom::{self, EomAxis, Threshold as Crossing};
use qradar_core::gaussian::PhaseSpaceGrid;
use qradar_core::jpa::{self, AmplifierParams};
use qradar_core::oe;
use qradar_core::receiver::{analyze, QiScenario, RocCurve};
use qradar_core::Error;
use rayon::prelude::*;
use serde_json::{json, Value};
use sha1::{Digest, Sha1};

use crate::config::{AmplifierSource, OeAxis, Parameters, ScenarioConfig, FORMAT_VERSION};

#[derive(Debug)]
pub enum RunError {
    /// Bad input detected while running (exit code 1).
    Validation(String),
    /// Instability, non-convergence or other numerical failure (exit code 2).
    Numerical(String),
    Io(std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Numerical(_) => 2,
            RunError::Validation(_) | RunError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Validation(m) => write!(f, "validation error: {m}"),
            RunError::Numerical(m) => write!(f, "numerical failure: {m}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation { .. }
            | Error::ModeIndex { .. }
            | Error::Dimension { .. }
            | Error::Domain(_)
            | Error::UnphysicalChannel(_)
            | Error::AboveThreshold { .. } => RunError::Validation(e.to_string()),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

/// `git hash-object` of the given bytes.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

struct Csv {
    name: String,
    text: String,
}

impl Csv {
    fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            text: header.join(",") + "\n",
        }
    }

    fn row(&mut self, cells: &[f64]) {
        let line: Vec<String> = cells.iter().map(|v| fmt_num(*v)).collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    fn row_flag(&mut self, cells: &[f64], flag: bool) {
        let mut line: Vec<String> = cells.iter().map(|v| fmt_num(*v)).collect();
        line.push(if flag { "true" } else { "false" }.into());
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

/// Runs `config` and writes its artifacts into `output_dir`. On numerical
/// failure the summary is still written, with the reason.
pub fn run(
    config: &ScenarioConfig,
    config_text: &str,
    output_dir: &Path,
) -> Result<RunOutcome, RunError> {
    fs::create_dir_all(output_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| {
            RunError::Validation(format!(
                "cannot start {} worker threads: {e}",
                config.parallelism
            ))
        })?;
    let outcome = pool.install(|| execute(config));
    let mut inputs = config.resolved.clone();
    if let Value::Object(m) = &mut inputs {
        // Neither changes any number in the outputs.
        m.remove("parallelism");
        m.remove("output_dir");
    }
    let mut summary = json!({
        "format_version": FORMAT_VERSION,
        "kind": config.kind.name(),
        "config_hash": git_blob_hash(config_text.as_bytes()),
        "inputs": inputs,
    });
    let mut files = Vec::new();
    let result = match outcome {
        Ok((csvs, results)) => {
            for csv in &csvs {
                let path = output_dir.join(&csv.name);
                fs::write(&path, &csv.text)?;
                files.push(path);
            }
            summary["status"] = json!("ok");
            summary["outputs"] = json!(csvs.iter().map(|c| c.name.clone()).collect::<Vec<_>>());
            summary["results"] = results;
            Ok(())
        }
        Err(e) => {
            let class = match e {
                RunError::Numerical(_) => "numerical",
                _ => "validation",
            };
            summary["status"] = json!("error");
            summary["error"] = json!({ "class": class, "message": e.to_string() });
            Err(e)
        }
    };
    let path = output_dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serialises");
    text.push('\n');
    fs::write(&path, text)?;
    files.push(path);
    result.map(|()| RunOutcome { files, summary })
}

fn execute(config: &ScenarioConfig) -> Result<(Vec<Csv>, Value), RunError> {
    match &config.parameters {
        Parameters::EomSweep(s) => {
            let column = match s.axis {
                EomAxis::Temperature => "temperature_k",
                EomAxis::Wavelength => "wavelength_m",
                EomAxis::GammaM => "gamma_m_rad_s",
            };
            let points = eom::sweep(&s.model, s.axis, &s.grid)?;
            require_any(points.iter().map(|p| p.error.as_ref()))?;
            let mut csv = Csv::new(
                "sweep.csv",
                &[
                    column,
                    "lambda_sph_oc_mc",
                    "lambda_sph_oc_mr",
                    "lambda_sph_mr_mc",
                    "stable",
                ],
            );
            for p in &points {
                let l = |pair| {
                    p.report
                        .as_ref()
                        .map_or(f64::NAN, |r| r.get(pair).lambda_sph)
                };
                csv.row_flag(
                    &[
                        p.value,
                        l(eom::ModePair::OcMc),
                        l(eom::ModePair::OcMr),
                        l(eom::ModePair::MrMc),
                    ],
                    p.stable(),
                );
            }
            let mut results = json!({
                "points": points.len(),
                "unstable_points": points.iter().filter(|p| !p.stable()).count(),
            });
            if s.axis == EomAxis::Temperature {
                let values: Vec<f64> = points
                    .iter()
                    .filter_map(|p| p.report.as_ref().map(|r| r.oc_mc.lambda_sph))
                    .collect();
                results["lambda_sph_oc_mc_monotone"] =
                    json!(values.windows(2).all(|w| w[1] >= w[0]));
            }
            if let Some((pair, th)) = &s.threshold {
                let t = eom::separability_threshold(&s.model, *pair, th.t_max, th.resolution)?;
                results["threshold"] = crossing_json(pair.label(), &t);
            }
            Ok((vec![csv], results))
        }
        Parameters::OeSweep(s) => oe_sweep(s),
        Parameters::OeEndToEnd(s) => {
            let leg = attenuation_channel(s.link.kappa_atm, s.link.distance, s.link.n_env)?;
            let link = round_trip(
                &leg,
                &target_channel(s.link.kappa_t, s.link.target_depth, s.link.n_target)?,
                &leg,
            )?;
            let points = oe::temperature_sweep(&s.model, Some(&link), &s.temperatures)?;
            require_any(points.iter().map(|p| p.error.as_ref()))?;
            let mut csv = Csv::new(
                "temperature.csv",
                &[
                    "temperature_k",
                    "two_eta_direct",
                    "two_eta_backscatter",
                    "stable",
                ],
            );
            for p in &points {
                csv.row_flag(
                    &[
                        p.temperature,
                        p.direct.as_ref().map_or(f64::NAN, |r| r.two_eta),
                        p.backscatter.as_ref().map_or(f64::NAN, |r| r.two_eta),
                    ],
                    p.error.is_none(),
                );
            }
            let mut results = json!({ "points": points.len(), "link": link.description });
            if let Some(th) = &s.threshold {
                let direct = oe::direct_threshold(&s.model, th.t_max, th.resolution)?;
                let e2e = oe::end_to_end_threshold(&s.model, &link, th.t_max, th.resolution)?;
                results["threshold_direct"] = crossing_json("oc_mc", &direct);
                results["threshold_end_to_end"] = crossing_json("oc_returned", &e2e);
            }
            Ok((vec![csv], results))
        }
        Parameters::JpaGain(s) => {
            let (amp, mut results) = match &s.source {
                AmplifierSource::Direct(a) => (*a, json!({})),
                AmplifierSource::Pump(p) => {
                    let field = jpa::classical_field(p)?;
                    let amp = AmplifierParams::from_pump(p, &field);
                    let info = json!({
                        "omega0_rad_s": p.omega0,
                        "kerr_rad_s": p.kerr,
                        "alpha": [field.alpha.re, field.alpha.im],
                        "branch_count": field.branch_count,
                        "field_residual": field.residual,
                    });
                    (amp, json!({ "pump": info }))
                }
            };
            results["delta0_rad_s"] = json!(amp.delta0);
            results["lambda1_rad_s"] = json!([amp.lambda1.re, amp.lambda1.im]);
            results["threshold_ratio"] = json!(amp.threshold_ratio());
            let mut gain = Csv::new(
                "gain.csv",
                &["omega_rad_s", "s11_abs", "s12_abs", "power_gain_db"],
            );
            let mut worst: f64 = 0.0;
            for &w in &s.omegas {
                let m = jpa::scattering_matrix(&amp, w)?;
                let (s11, s12) = (m[(0, 0)].norm(), m[(0, 1)].norm());
                worst = worst.max((s11 * s11 - s12 * s12 - 1.0).abs());
                gain.row(&[w, s11, s12, 20.0 * s11.log10()]);
            }
            results["power_gain_db_at_zero"] = json!(jpa::power_gain_db(&amp, 0.0)?);
            results["bogoliubov_max_deviation"] = json!(worst);
            let mut csvs = vec![gain];
            if let Some(scan) = &s.pump_scan {
                let mut curve = Csv::new("gain_vs_pump.csv", &["lambda1_rad_s", "power_gain_db"]);
                for &l in scan {
                    let a = AmplifierParams {
                        lambda1: num_complex::Complex64::new(l, 0.0),
                        ..amp
                    };
                    curve.row(&[l, jpa::power_gain_db(&a, 0.0)?]);
                }
                csvs.push(curve);
            }
            Ok((csvs, results))
        }
        Parameters::JpaWigner(s) => {
            let grid = PhaseSpaceGrid::square(s.q_min, s.q_max, s.step)?;
            let frames = jpa::wigner_sweep(&s.gains, &grid, s.phase)?;
            let mut csvs = Vec::new();
            let mut summaries = Vec::new();
            for (i, f) in frames.iter().enumerate() {
                let mut csv = Csv::new(&format!("wigner_{i}.csv"), &["q", "p", "w"]);
                for (a, q) in f.wigner.q.iter().enumerate() {
                    for (b, p) in f.wigner.p.iter().enumerate() {
                        csv.row(&[*q, *p, f.wigner.values[(a, b)]]);
                    }
                }
                csvs.push(csv);
                summaries.push(json!({
                    "file": format!("wigner_{i}.csv"),
                    "gain_factor": f.gain_factor,
                    "minor_variance": f.minor_variance,
                    "major_variance": f.major_variance,
                    "tilt_rad": f.tilt,
                    "riemann_sum": f.wigner.riemann_sum(),
                    "peak": f.wigner.max(),
                }));
            }
            Ok((csvs, json!({ "frames": summaries })))
        }
        Parameters::ChannelNeff(s) => {
            let rows: Vec<Result<[f64; 3], Error>> = s
                .lengths
                .par_iter()
                .map(|&l| {
                    let profile = qradar_core::channel::ThermalProfile { l, ..s.profile };
                    Ok([
                        l,
                        n_eff_closed(&profile)?,
                        n_eff_general_step(&profile, s.quadrature_points)?,
                    ])
                })
                .collect();
            let mut csv = Csv::new("neff.csv", &["length_m", "n_eff_closed", "n_eff_general"]);
            let mut worst: f64 = 0.0;
            for r in rows {
                let r = r?;
                worst = worst.max((r[1] - r[2]).abs() / r[1].abs().max(1.0));
                csv.row(&r);
            }
            Ok((vec![csv], json!({ "max_closed_vs_general": worst })))
        }
        Parameters::QiRoc(q) => {
            let mut scenario = QiScenario::thermal_target(
                q.squeezing,
                q.reflectivity,
                q.n_background,
                q.samples_per_decision,
                q.n_decisions,
                config.seed,
            )?;
            scenario.detector = q.detector;
            scenario.heterodyne = q.heterodyne;
            let report = analyze(&scenario)?;
            let results = json!({
                "signal_photons": scenario.signal_photons(),
                "rho_analytic": report.rho_analytic,
                "rho_empirical": report.rho_empirical,
                "auc_qi": report.auc_qi,
                "auc_ci": report.auc_ci,
            });
            Ok((
                vec![
                    roc_csv("roc_qi.csv", &report.roc_qi),
                    roc_csv("roc_ci.csv", &report.roc_ci),
                ],
                results,
            ))
        }
    }
}

fn oe_sweep(s: &crate::config::OeSweep) -> Result<(Vec<Csv>, Value), RunError> {
    let column = s.axis.column();
    let mut results = json!({ "points": s.grid.len() });
    let csv = match s.axis {
        OeAxis::DeltaEg => {
            let curve = oe::entanglement_vs_detuning(&s.model, &s.grid)?;
            require_any(curve.points.iter().map(|p| p.error.as_ref()))?;
            let mut csv = Csv::new("detuning.csv", &[column, "two_eta", "stable"]);
            for p in &curve.points {
                csv.row_flag(
                    &[p.delta_eg, p.two_eta.unwrap_or(f64::NAN)],
                    p.two_eta.is_some(),
                );
            }
            results["argmin_delta_eg_rad_s"] = json!(curve.argmin);
            results["min_two_eta"] = json!(curve.min_two_eta);
            csv
        }
        OeAxis::Temperature => {
            let points = oe::temperature_sweep(&s.model, None, &s.grid)?;
            require_any(points.iter().map(|p| p.error.as_ref()))?;
            let mut csv = Csv::new("temperature.csv", &[column, "two_eta", "stable"]);
            for p in &points {
                csv.row_flag(
                    &[
                        p.temperature,
                        p.direct.as_ref().map_or(f64::NAN, |r| r.two_eta),
                    ],
                    p.error.is_none(),
                );
            }
            csv
        }
        OeAxis::MuC => {
            let (t_max, res) = s
                .threshold
                .as_ref()
                .map_or((20.0, 1e-3), |t| (t.t_max, t.resolution));
            let rows: Vec<Result<CouplingRow, Error>> = s
                .grid
                .par_iter()
                .map(|&mu| {
                    let p = s.model.with_mu_c(mu);
                    let eta = oe::oc_mc_blocks(&p).and_then(|b| two_eta(&b));
                    match eta {
                        Ok(e) => Ok((mu, Some(e), oe::direct_threshold(&p, t_max, res)?.kelvin())),
                        Err(Error::Unstable { .. } | Error::NoConvergence { .. }) => {
                            Ok((mu, None, None))
                        }
                        Err(e) => Err(e),
                    }
                })
                .collect();
            let mut csv = Csv::new(
                "coupling.csv",
                &[column, "two_eta", "threshold_k", "stable"],
            );
            let mut any_stable = false;
            for r in rows {
                let (mu, eta, t) = r?;
                any_stable |= eta.is_some();
                csv.row_flag(
                    &[mu, eta.unwrap_or(f64::NAN), t.unwrap_or(f64::NAN)],
                    eta.is_some(),
                );
            }
            if !any_stable {
                return Err(RunError::Numerical(
                    "no coupling in the grid gives a stable operating point".into(),
                ));
            }
            csv
        }
    };
    if let Some(th) = &s.threshold {
        let t = oe::direct_threshold(&s.model, th.t_max, th.resolution)?;
        results["threshold_direct"] = crossing_json("oc_mc", &t);
    }
    Ok((vec![csv], results))
}

/// `(μ_c, 2η, T*)`; `None` where the operating point is unstable.
type CouplingRow = (f64, Option<f64>, Option<f64>);

/// A sweep in which no grid point could be evaluated is a failure, not data.
fn require_any<'a>(errors: impl IntoIterator<Item = Option<&'a String>>) -> Result<(), RunError> {
    let mut first = None;
    for e in errors {
        match e {
            None => return Ok(()),
            Some(msg) => {
                first.get_or_insert(msg);
            }
        }
    }
    Err(RunError::Numerical(format!(
        "no grid point could be evaluated: {}",
        first.map_or("empty grid", |m| m.as_str())
    )))
}

fn crossing_json(pair: &str, t: &Crossing) -> Value {
    let (kind, kelvin) = match t {
        Crossing::NeverEntangled => ("never_entangled", None),
        Crossing::Beyond(k) => ("beyond", Some(*k)),
        Crossing::At(k) => ("at", Some(*k)),
    };
    json!({ "pair": pair, "kind": kind, "kelvin": kelvin })
}

fn roc_csv(name: &str, roc: &RocCurve) -> Csv {
    let mut csv = Csv::new(name, &["threshold", "pfa", "pd"]);
    for p in &roc.points {
        csv.row(&[p.threshold, p.pfa, p.pd]);
    }
    csv
}
