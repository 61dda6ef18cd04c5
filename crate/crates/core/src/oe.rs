//! Opto-electronic converter: an optical cavity drives a photodetector whose
//! carriers modulate a varactor in a microwave cavity.
//!
//! Mode order is photodetector `(q, p)`, optical `(X_c, Y_c)`, microwave
//! `(X_w, Y_w)`. The photodetector oscillator sits at the optical transition
//! frequency, so its bath is effectively at zero occupation; only the two
//! cavity baths carry thermal noise.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{report, two_eta, BipartiteBlocks, CriteriaReport};
use crate::eom::{bisect_threshold, continuation_fixed_point, Threshold, SPEED_OF_LIGHT};
use crate::error::{validation, Error, Result};
use crate::gaussian::{GaussianChannel, GaussianState};
use crate::langevin::{diffusion_from_baths, Bath, LinearLangevinModel};

pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Reference capacitance sensitivity of the varactor.
pub const REFERENCE_MU_C: f64 = 0.0002;

/// How the photodetector position is driven by the optical field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OeLayout {
    /// Position driven by `√2 g_op (A_r X_c + A_i Y_c)`, the partner of the
    /// optical back-action term, with the microwave couplings and detuning
    /// shift taken from the same interaction.
    #[default]
    Reciprocal,
    /// Position driven by `√2 g_op X_c`, momentum by `−√2 g_wp C_i Y_w`, and
    /// the lower microwave detuning entry `−Δ_w − g_wp X_s`.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OeParams {
    pub omega_c: f64,
    pub omega_w: f64,
    pub delta_c: f64,
    pub delta_w: f64,
    /// Transition frequency minus optical cavity frequency (rad/s).
    pub delta_eg: f64,
    pub kappa_c: f64,
    pub kappa_w: f64,
    pub gamma_p: f64,
    pub g_op: f64,
    pub g_wp: f64,
    /// Varactor capacitance sensitivity; `g_wp` is proportional to it.
    pub mu_c: f64,
    pub temperature: f64,
    pub e_c: f64,
    /// Magnitude; the phase is chosen so that `C_s` is real and positive.
    pub e_w: f64,
    #[serde(default)]
    pub layout: OeLayout,
}

impl OeParams {
    /// Reconstructed reference set, not taken from a published table.
    ///
    /// Rates are multiples of `ω_u = 2π × 1 MHz`. Intracavity amplitudes are
    /// `|A_s| ≈ |C_s| ≈ 10⁴`, with effective couplings `g_op|A_s| = 0.365 ω_u`
    /// and `g_wp|C_s| = 0.2 ω_u`, a 15 GHz microwave mode and a 1550 nm
    /// optical mode.
    pub fn reference() -> Self {
        let wu = 2.0 * std::f64::consts::PI * 1e6;
        let amp = 1e4;
        let g_wp = 0.2 * wu / amp;
        let delta_eg = wu;
        let detuned_w = -1.721_787 * wu;
        let delta_w = detuned_w + g_wp * g_wp * amp * amp / delta_eg;
        let delta_c = 1.670_594 * wu;
        let kappa_c = 0.384_662 * wu;
        let kappa_w = 0.038_473 * wu;
        Self {
            omega_c: 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / 1550e-9,
            omega_w: 2.0 * std::f64::consts::PI * 15e9,
            delta_c,
            delta_w,
            delta_eg,
            kappa_c,
            kappa_w,
            gamma_p: 2e-6 * wu,
            g_op: 0.365_081 * wu / amp,
            g_wp,
            mu_c: REFERENCE_MU_C,
            temperature: 0.03,
            e_c: amp * delta_c.hypot(kappa_c),
            e_w: amp * detuned_w.hypot(kappa_w),
            layout: OeLayout::Reciprocal,
        }
    }

    /// Transition frequency `ω_c + Δ_eg`, which sets the photodetector bath.
    pub fn omega_eg(&self) -> f64 {
        self.omega_c + self.delta_eg
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    /// Changes `μ_c`, scaling `g_wp` proportionally.
    pub fn with_mu_c(mut self, mu_c: f64) -> Self {
        self.g_wp *= mu_c / self.mu_c;
        self.mu_c = mu_c;
        self
    }

    pub fn with_delta_eg(mut self, delta_eg: f64) -> Self {
        self.delta_eg = delta_eg;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa_c", self.kappa_c),
            ("kappa_w", self.kappa_w),
            ("gamma_p", self.gamma_p),
            ("g_op", self.g_op),
            ("g_wp", self.g_wp),
            ("temperature", self.temperature),
            ("e_c", self.e_c),
            ("e_w", self.e_w),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(validation(
                    "oe_params",
                    format!("{name} must be finite and ≥ 0, got {v}"),
                ));
            }
        }
        if !(self.mu_c > 0.0) {
            return Err(validation(
                "oe_params",
                format!("mu_c must be positive, got {}", self.mu_c),
            ));
        }
        for (name, v) in [
            ("omega_c", self.omega_c),
            ("omega_w", self.omega_w),
            ("omega_eg", self.omega_eg()),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(validation(
                    "oe_params",
                    format!("{name} must be positive, got {v}"),
                ));
            }
        }
        for (name, v) in [
            ("delta_c", self.delta_c),
            ("delta_w", self.delta_w),
            ("delta_eg", self.delta_eg),
        ] {
            if !v.is_finite() {
                return Err(validation("oe_params", format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Photodetector material constants entering the optical coupling rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdMaterialSpec {
    /// C·m
    pub dipole_moment: f64,
    /// Density of states at the transition energy, 1/(J·m³).
    pub density_of_states: f64,
    /// Full width at half maximum of the transition line, rad/s.
    pub lorentzian_width: f64,
    /// m³
    pub mode_volume: f64,
}

/// `π ω_c μ² g_J L(ω_eg) / (ε₀ V_m)` with a unit-area Lorentzian line of the
/// given width centred on the optical cavity frequency.
pub fn coupling_gop(spec: &PdMaterialSpec, omega_c: f64, omega_eg: f64) -> Result<f64> {
    if !(spec.dipole_moment >= 0.0)
        || !(spec.density_of_states > 0.0)
        || !(spec.lorentzian_width > 0.0)
        || !(spec.mode_volume > 0.0)
    {
        return Err(validation(
            "pd_material",
            format!("constants must be positive: {spec:?}"),
        ));
    }
    let half = 0.5 * spec.lorentzian_width;
    let detuning = omega_eg - omega_c;
    let line = half / std::f64::consts::PI / (detuning * detuning + half * half);
    Ok(
        std::f64::consts::PI * omega_c / (EPSILON_0 * spec.mode_volume)
            * spec.dipole_moment.powi(2)
            * spec.density_of_states
            * line,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OeOperatingPoint {
    pub a_s: Complex64,
    pub c_s: Complex64,
    pub p_s: f64,
    pub x_s: f64,
    pub e_w_phase: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Steady state of `A = E_c/(κ_c + j(Δ_c + g_op P))`, `P = −2 g_op Re A/Δ_eg`,
/// `C = E_w/(κ_w + j(Δ_w − g_wp X))`, `X = (g_wp|C|² − γ_p P)/Δ_eg`.
///
/// `P` depends only on itself, then `X` only on itself and `P`; each is solved
/// by continuation from zero drive. `Δ_eg = 0` has no steady state.
pub fn operating_point(params: &OeParams) -> Result<OeOperatingPoint> {
    params.validate()?;
    let deg = params.delta_eg;
    if deg.abs() < 1e-300 {
        return Err(Error::Numerical(
            "photodetector on resonance (Δ_eg = 0): no steady state".into(),
        ));
    }
    let (g, kc, dc, ec) = (params.g_op, params.kappa_c, params.delta_c, params.e_c);
    let (p_s, it_p) = continuation_fixed_point(0.0, |p, s| {
        let d = dc + g * p;
        let den = kc * kc + d * d;
        let f = -2.0 * g * s * ec * kc / den / deg;
        let df = -2.0 * g * s * ec * kc * (-2.0 * d * g) / (den * den) / deg;
        (f, df)
    })?;
    let a_s = Complex64::new(ec, 0.0) / Complex64::new(kc, dc + g * p_s);

    let (w, kw, dw, ew, gp) = (
        params.g_wp,
        params.kappa_w,
        params.delta_w,
        params.e_w,
        params.gamma_p,
    );
    let (x_s, it_x) = continuation_fixed_point(-gp * p_s / deg, |x, s| {
        let d = dw - w * x;
        let den = kw * kw + d * d;
        let power = (s * ew).powi(2) / den;
        let dpower = (s * ew).powi(2) * 2.0 * d * w / (den * den);
        ((w * power - gp * p_s) / deg, w * dpower / deg)
    })?;
    let den_w = Complex64::new(kw, dw - w * x_s);
    let c_s = Complex64::new(ew / den_w.norm(), 0.0);
    let e_w_phase = if ew == 0.0 { 0.0 } else { den_w.arg() };
    let mut op = OeOperatingPoint {
        a_s,
        c_s,
        p_s,
        x_s,
        e_w_phase,
        residual: 0.0,
        iterations: it_p + it_x,
    };
    op.residual = operating_residual(params, &op);
    Ok(op)
}

pub fn operating_residual(params: &OeParams, op: &OeOperatingPoint) -> f64 {
    let rel = |lhs: Complex64, rhs: Complex64| {
        let scale = lhs.norm().max(rhs.norm());
        if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs).norm() / scale
        }
    };
    let r_a = rel(
        op.a_s * Complex64::new(params.kappa_c, params.delta_c + params.g_op * op.p_s),
        Complex64::new(params.e_c, 0.0),
    );
    let r_p = rel(
        (op.p_s * params.delta_eg).into(),
        (-2.0 * params.g_op * op.a_s.re).into(),
    );
    let r_c = rel(
        op.c_s * Complex64::new(params.kappa_w, params.delta_w - params.g_wp * op.x_s),
        Complex64::from_polar(params.e_w, op.e_w_phase),
    );
    let r_x = rel(
        (op.x_s * params.delta_eg).into(),
        (params.g_wp * op.c_s.norm_sqr() - params.gamma_p * op.p_s).into(),
    );
    r_a.max(r_p).max(r_c).max(r_x)
}

pub fn drift_matrix(params: &OeParams, op: &OeOperatingPoint) -> DMatrix<f64> {
    let r2 = std::f64::consts::SQRT_2;
    let (g, w) = (params.g_op, params.g_wp);
    let (ar, ai) = (op.a_s.re, op.a_s.im);
    let (cr, ci) = (op.c_s.re, op.c_s.im);
    let dc = params.delta_c + g * op.p_s;
    let dw = params.delta_w - w * op.x_s;
    let mut m = DMatrix::zeros(6, 6);
    m[(0, 1)] = params.delta_eg;
    m[(1, 0)] = -params.delta_eg;
    m[(1, 1)] = -params.gamma_p;
    m[(1, 4)] = r2 * w * cr;
    m[(2, 1)] = r2 * g * ai;
    m[(2, 2)] = -params.kappa_c;
    m[(2, 3)] = dc;
    m[(3, 1)] = -r2 * g * ar;
    m[(3, 2)] = -dc;
    m[(3, 3)] = -params.kappa_c;
    m[(4, 0)] = -r2 * w * ci;
    m[(4, 4)] = -params.kappa_w;
    m[(4, 5)] = dw;
    m[(5, 0)] = r2 * w * cr;
    m[(5, 5)] = -params.kappa_w;
    match params.layout {
        OeLayout::Reciprocal => {
            m[(0, 2)] = r2 * g * ar;
            m[(0, 3)] = r2 * g * ai;
            m[(1, 5)] = r2 * w * ci;
            m[(5, 4)] = -dw;
        }
        OeLayout::Printed => {
            m[(0, 2)] = r2 * g;
            m[(1, 5)] = -r2 * w * ci;
            m[(5, 4)] = -params.delta_w - w * op.x_s;
        }
    }
    m
}

pub fn baths(params: &OeParams) -> [Bath; 3] {
    let t = params.temperature;
    [
        Bath::mechanical(params.omega_eg(), params.gamma_p, t),
        Bath::cavity(params.omega_c, params.kappa_c, t),
        Bath::cavity(params.omega_w, params.kappa_w, t),
    ]
}

pub fn langevin_model(params: &OeParams) -> Result<LinearLangevinModel> {
    let op = operating_point(params)?;
    LinearLangevinModel::new(
        drift_matrix(params, &op),
        diffusion_from_baths(&baths(params))?,
        vec!["photodetector".into(), "optical".into(), "microwave".into()],
    )
}

pub fn steady_state(params: &OeParams) -> Result<GaussianState> {
    let model = langevin_model(params)?;
    GaussianState::from_cov(model.steady_state_cov()?)
}

/// Blocks of the optical–microwave pair.
pub fn oc_mc_blocks(params: &OeParams) -> Result<BipartiteBlocks> {
    BipartiteBlocks::from_state(&steady_state(params)?, 1, 2)
}

pub fn direct_report(params: &OeParams) -> Result<CriteriaReport> {
    report(&oc_mc_blocks(params)?)
}

/// Optical–microwave blocks after the microwave mode has travelled through
/// `channel` (typically out to a target and back).
pub fn end_to_end_blocks(params: &OeParams, channel: &GaussianChannel) -> Result<BipartiteBlocks> {
    let pair = oc_mc_blocks(params)?.to_state()?;
    let returned = pair.apply_channel_to_mode(channel, 1)?;
    BipartiteBlocks::from_state(&returned, 0, 1)
}

pub fn end_to_end_report(params: &OeParams, channel: &GaussianChannel) -> Result<CriteriaReport> {
    report(&end_to_end_blocks(params, channel)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetuningPoint {
    pub delta_eg: f64,
    pub two_eta: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetuningCurve {
    pub points: Vec<DetuningPoint>,
    /// Detuning with the smallest `2η` among stable points.
    pub argmin: Option<f64>,
    pub min_two_eta: Option<f64>,
}

pub fn entanglement_vs_detuning(params: &OeParams, grid: &[f64]) -> Result<DetuningCurve> {
    if grid.is_empty() {
        return Err(validation("sweep", "empty grid"));
    }
    let points: Vec<DetuningPoint> = grid
        .par_iter()
        .map(
            |&d| match oc_mc_blocks(&params.with_delta_eg(d)).and_then(|b| two_eta(&b)) {
                Ok(e) => DetuningPoint {
                    delta_eg: d,
                    two_eta: Some(e),
                    error: None,
                },
                Err(e) => DetuningPoint {
                    delta_eg: d,
                    two_eta: None,
                    error: Some(e.to_string()),
                },
            },
        )
        .collect();
    let best = points
        .iter()
        .filter_map(|p| p.two_eta.map(|e| (p.delta_eg, e)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    Ok(DetuningCurve {
        argmin: best.map(|b| b.0),
        min_two_eta: best.map(|b| b.1),
        points,
    })
}

/// One row of a temperature sweep: direct and (optionally) returned-mode `2η`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperaturePoint {
    pub temperature: f64,
    pub direct: Option<CriteriaReport>,
    pub backscatter: Option<CriteriaReport>,
    pub error: Option<String>,
}

pub fn temperature_sweep(
    params: &OeParams,
    channel: Option<&GaussianChannel>,
    grid: &[f64],
) -> Result<Vec<TemperaturePoint>> {
    if grid.is_empty() {
        return Err(validation("sweep", "empty grid"));
    }
    Ok(grid
        .par_iter()
        .map(|&t| {
            let p = params.with_temperature(t);
            let eval = || -> Result<(CriteriaReport, Option<CriteriaReport>)> {
                let blocks = oc_mc_blocks(&p)?;
                let back = match channel {
                    Some(c) => {
                        let s = blocks.to_state()?.apply_channel_to_mode(c, 1)?;
                        Some(report(&BipartiteBlocks::from_state(&s, 0, 1)?)?)
                    }
                    None => None,
                };
                Ok((report(&blocks)?, back))
            };
            match eval() {
                Ok((d, b)) => TemperaturePoint {
                    temperature: t,
                    direct: Some(d),
                    backscatter: b,
                    error: None,
                },
                Err(e) => TemperaturePoint {
                    temperature: t,
                    direct: None,
                    backscatter: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// Temperature at which the optical–microwave pair becomes separable.
pub fn direct_threshold(params: &OeParams, t_max: f64, resolution: f64) -> Result<Threshold> {
    bisect_threshold(
        |t| Ok(two_eta(&oc_mc_blocks(&params.with_temperature(t))?)? < 1.0),
        0.0,
        t_max,
        resolution,
    )
}

/// Same as [`direct_threshold`] for the mode returned through `channel`.
pub fn end_to_end_threshold(
    params: &OeParams,
    channel: &GaussianChannel,
    t_max: f64,
    resolution: f64,
) -> Result<Threshold> {
    bisect_threshold(
        |t| Ok(two_eta(&end_to_end_blocks(&params.with_temperature(t), channel)?)? < 1.0),
        0.0,
        t_max,
        resolution,
    )
}
