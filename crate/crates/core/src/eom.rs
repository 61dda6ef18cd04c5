//! Electro-opto-mechanical converter: an optical cavity and a microwave
//! cavity both coupled to one mechanical resonator.
//!
//! Mode order throughout is mechanical `(q, p)`, optical `(X_c, Y_c)`,
//! microwave `(X_w, Y_w)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{report, BipartiteBlocks, CriteriaReport};
use crate::error::{validation, Error, Result};
use crate::gaussian::GaussianState;
use crate::langevin::{diffusion_from_baths, Bath, LinearLangevinModel};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const MAX_ITERATIONS: usize = 10_000;
const OP_TOL: f64 = 1e-12;
const CONTINUATION_STEPS: usize = 32;

/// Where the mechanical–microwave coupling enters the momentum equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingLayout {
    /// Momentum is driven by the microwave quadratures, mirroring how the
    /// microwave mode is driven by position. Always yields physical states.
    #[default]
    Reciprocal,
    /// Momentum is driven by the optical phase quadrature. Kept for
    /// comparison; the resulting drift is not generated by any Hamiltonian.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EomParams {
    pub omega_c: f64,
    pub omega_m: f64,
    pub omega_w: f64,
    pub kappa_c: f64,
    pub gamma_m: f64,
    pub kappa_w: f64,
    pub delta_c: f64,
    pub delta_w: f64,
    /// Optomechanical coupling rate (rad/s).
    pub g1: f64,
    /// Electromechanical coupling; multiplies `Δ_w·C_s` to give a rate.
    pub g2: f64,
    /// Optical drive rate (rad/s); its phase is the reference.
    pub e_c: f64,
    /// Microwave drive magnitude (rad/s); its phase is chosen to make `C_s` real.
    pub e_w: f64,
    pub temperature: f64,
    #[serde(default)]
    pub layout: CouplingLayout,
}

impl EomParams {
    /// Reconstructed reference set: entangled at millikelvin temperatures,
    /// optical–microwave entanglement lost a little below 1 K.
    ///
    /// Not taken from a published table. Rates are multiples of the 1 MHz
    /// mechanical frequency; the drives are sized so the effective
    /// electromechanical rate `G₂Δ_w C_s` is 0.361 ω_m with `C_s = 10⁴`.
    pub fn reference() -> Self {
        let wm = 2.0 * std::f64::consts::PI * 1e6;
        let cs = 1e4;
        let g2_eff = 0.361 * wm;
        let detuned_w = -1.721_787 * wm;
        // bare detuning such that the radiation-pressure shift lands on detuned_w
        let delta_w = detuned_w + g2_eff * g2_eff / wm;
        let kappa_w = 0.038_473 * wm;
        let g2 = g2_eff / (delta_w.abs() * cs);
        let delta_c = 1.670_594 * wm;
        let kappa_c = 0.384_662 * wm;
        Self {
            omega_c: 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / 1550e-9,
            omega_m: wm,
            omega_w: 2.0 * std::f64::consts::PI * 15e9,
            kappa_c,
            gamma_m: 2e-6 * wm,
            kappa_w,
            delta_c,
            delta_w,
            g1: 0.365_081 * wm,
            g2,
            e_c: 1e4 * delta_c.hypot(kappa_c),
            e_w: cs * detuned_w.hypot(kappa_w),
            temperature: 0.03,
            layout: CouplingLayout::Reciprocal,
        }
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / self.omega_c
    }

    pub fn with_wavelength(mut self, lambda: f64) -> Self {
        self.omega_c = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / lambda;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("kappa_c", self.kappa_c),
            ("gamma_m", self.gamma_m),
            ("kappa_w", self.kappa_w),
            ("e_c", self.e_c),
            ("e_w", self.e_w),
            ("temperature", self.temperature),
        ];
        for (name, v) in rates {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(validation(
                    "eom_params",
                    format!("{name} must be finite and ≥ 0, got {v}"),
                ));
            }
        }
        for (name, v) in [
            ("omega_c", self.omega_c),
            ("omega_m", self.omega_m),
            ("omega_w", self.omega_w),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(validation(
                    "eom_params",
                    format!("{name} must be positive, got {v}"),
                ));
            }
        }
        for (name, v) in [
            ("delta_c", self.delta_c),
            ("delta_w", self.delta_w),
            ("g1", self.g1),
            ("g2", self.g2),
        ] {
            if !v.is_finite() {
                return Err(validation("eom_params", format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Classical steady-state amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EomOperatingPoint {
    pub a_s: Complex64,
    pub c_s: Complex64,
    pub p_s: f64,
    pub x_s: f64,
    /// Phase given to the microwave drive so that `c_s` is real and positive.
    pub e_w_phase: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Solves the four coupled steady-state relations.
///
/// The optical amplitude and momentum are linear in each other and solved in
/// closed form. The microwave intracavity power depends on the position it
/// produces, which is solved by continuation in drive strength from zero with
/// damped fixed-point steps and a Newton fallback, so the returned branch is
/// the one connected to the undriven state.
pub fn operating_point(params: &EomParams) -> Result<EomOperatingPoint> {
    params.validate()?;
    let EomParams {
        omega_m: wm,
        kappa_c,
        delta_c,
        g1,
        ..
    } = *params;
    let den_c = Complex64::new(kappa_c, delta_c);
    let lin = 1.0 - 2.0 * g1 * g1 * delta_c / (wm * den_c.norm_sqr());
    if lin.abs() < 1e-14 {
        return Err(Error::Numerical(
            "optomechanical operating point is singular".into(),
        ));
    }
    let p_s = if params.e_c == 0.0 {
        0.0
    } else {
        -2.0 * g1 * (Complex64::new(params.e_c, 0.0) / den_c).re / (wm * lin)
    };
    let a_s = (Complex64::new(params.e_c, 0.0) - Complex64::i() * g1 * p_s) / den_c;

    let (u, iterations) = solve_microwave_power(params, p_s)?;
    let x_s = position(params, p_s, u);
    let c_s = Complex64::new(u.sqrt(), 0.0);
    let den_w = Complex64::new(params.kappa_w, params.delta_w * (1.0 - params.g2 * x_s));
    let e_w_phase = if params.e_w == 0.0 { 0.0 } else { den_w.arg() };
    let mut op = EomOperatingPoint {
        a_s,
        c_s,
        p_s,
        x_s,
        e_w_phase,
        residual: 0.0,
        iterations,
    };
    op.residual = operating_residual(params, &op);
    Ok(op)
}

fn position(params: &EomParams, p_s: f64, u: f64) -> f64 {
    (-params.gamma_m * p_s + params.delta_w * params.g2 * u) / params.omega_m
}

/// `|C_s|²` as a function of itself at drive scale `s`, with derivative.
fn power_map(params: &EomParams, p_s: f64, u: f64, s: f64) -> (f64, f64) {
    let e2 = (s * params.e_w).powi(2);
    let shift = 1.0 - params.g2 * position(params, p_s, u);
    let dw = params.delta_w * shift;
    let den = params.kappa_w * params.kappa_w + dw * dw;
    let dshift = -params.g2 * params.delta_w * params.g2 / params.omega_m;
    let dden = 2.0 * dw * params.delta_w * dshift;
    (e2 / den, -e2 * dden / (den * den))
}

fn solve_microwave_power(params: &EomParams, p_s: f64) -> Result<(f64, usize)> {
    if params.e_w == 0.0 {
        return Ok((0.0, 0));
    }
    continuation_fixed_point(0.0, |u, s| power_map(params, p_s, u, s))
}

/// Solves `x = f(x; s)` at `s = 1` by stepping the drive scale `s` up from
/// zero, starting from `x0` (the undriven solution). `map` returns `f` and
/// `∂f/∂x`. Each step uses damped fixed-point iteration, falling back to
/// Newton's method.
pub(crate) fn continuation_fixed_point<F>(x0: f64, map: F) -> Result<(f64, usize)>
where
    F: Fn(f64, f64) -> (f64, f64),
{
    let mut x = x0;
    let mut used = 0;
    let mut residual = f64::INFINITY;
    let rel = |f: f64, x: f64| {
        let scale = f.abs().max(x.abs());
        if scale == 0.0 {
            0.0
        } else {
            (f - x).abs() / scale
        }
    };
    for step in 1..=CONTINUATION_STEPS {
        let s = step as f64 / CONTINUATION_STEPS as f64;
        let mut beta = 1.0;
        let mut converged = false;
        let mut prev = f64::INFINITY;
        for _ in 0..200 {
            used += 1;
            let (f, _) = map(x, s);
            residual = rel(f, x);
            if residual <= OP_TOL {
                converged = true;
                break;
            }
            if residual > prev {
                beta *= 0.5;
            }
            prev = residual;
            x = (1.0 - beta) * x + beta * f;
        }
        if !converged {
            for _ in 0..100 {
                used += 1;
                let (f, df) = map(x, s);
                residual = rel(f, x);
                if residual <= OP_TOL {
                    converged = true;
                    break;
                }
                let slope = 1.0 - df;
                if slope.abs() < 1e-300 {
                    break;
                }
                x -= (x - f) / slope;
            }
        }
        if !converged || !x.is_finite() || used > MAX_ITERATIONS {
            return Err(Error::NoConvergence {
                iterations: used,
                residual,
            });
        }
    }
    Ok((x, used))
}

/// Largest relative residual of the four steady-state relations.
pub fn operating_residual(params: &EomParams, op: &EomOperatingPoint) -> f64 {
    let j = Complex64::i();
    let rel = |lhs: Complex64, rhs: Complex64| {
        let scale = lhs.norm().max(rhs.norm());
        if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs).norm() / scale
        }
    };
    let e_w = Complex64::from_polar(params.e_w, op.e_w_phase);
    let r_a = rel(
        op.a_s * Complex64::new(params.kappa_c, params.delta_c),
        Complex64::new(params.e_c, 0.0) - j * params.g1 * op.p_s,
    );
    let r_p = rel(
        (op.p_s * params.omega_m).into(),
        (-2.0 * params.g1 * op.a_s.re).into(),
    );
    let r_x = rel(
        (op.x_s * params.omega_m).into(),
        (-params.gamma_m * op.p_s + params.delta_w * params.g2 * op.c_s.norm_sqr()).into(),
    );
    let r_c = rel(
        op.c_s
            * Complex64::new(
                params.kappa_w,
                params.delta_w - params.delta_w * params.g2 * op.x_s,
            ),
        e_w,
    );
    r_a.max(r_p).max(r_x).max(r_c)
}

/// Linearised fluctuation drift.
pub fn drift_matrix(params: &EomParams, op: &EomOperatingPoint) -> DMatrix<f64> {
    let r2 = std::f64::consts::SQRT_2;
    let EomParams {
        omega_m: wm,
        gamma_m: gm,
        kappa_c: kc,
        delta_c: dc,
        g1,
        g2,
        delta_w: dw,
        ..
    } = *params;
    let g11 = -r2 * g2 * dw * op.c_s.im;
    let g22 = r2 * g2 * dw * op.c_s.re;
    let kw1 = params.kappa_w;
    let dw1 = dw - g2 * dw * op.x_s;
    let mut a = DMatrix::zeros(6, 6);
    a[(0, 1)] = wm;
    a[(0, 2)] = r2 * g1;
    a[(1, 0)] = -wm;
    a[(1, 1)] = -gm;
    match params.layout {
        CouplingLayout::Reciprocal => {
            a[(1, 4)] = g22;
            a[(1, 5)] = -g11;
        }
        CouplingLayout::Printed => a[(1, 3)] = g22,
    }
    a[(2, 2)] = -kc;
    a[(2, 3)] = dc;
    a[(3, 1)] = -r2 * g1;
    a[(3, 2)] = -dc;
    a[(3, 3)] = -kc;
    a[(4, 0)] = g11;
    a[(4, 4)] = -kw1;
    a[(4, 5)] = dw1;
    a[(5, 0)] = g22;
    a[(5, 4)] = -dw1;
    a[(5, 5)] = -kw1;
    a
}

pub fn baths(params: &EomParams) -> [Bath; 3] {
    let t = params.temperature;
    [
        Bath::mechanical(params.omega_m, params.gamma_m, t),
        Bath::cavity(params.omega_c, params.kappa_c, t),
        Bath::cavity(params.omega_w, params.kappa_w, t),
    ]
}

pub fn langevin_model(params: &EomParams) -> Result<LinearLangevinModel> {
    let op = operating_point(params)?;
    LinearLangevinModel::new(
        drift_matrix(params, &op),
        diffusion_from_baths(&baths(params))?,
        vec!["mechanical".into(), "optical".into(), "microwave".into()],
    )
}

/// Steady-state covariance of the three fluctuation modes.
pub fn steady_state(params: &EomParams) -> Result<GaussianState> {
    let model = langevin_model(params)?;
    GaussianState::from_cov(model.steady_state_cov()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModePair {
    /// optical cavity – microwave cavity
    OcMc,
    /// optical cavity – mechanical resonator
    OcMr,
    /// mechanical resonator – microwave cavity
    MrMc,
}

impl ModePair {
    pub const ALL: [ModePair; 3] = [ModePair::OcMc, ModePair::OcMr, ModePair::MrMc];

    pub fn modes(self) -> (usize, usize) {
        match self {
            ModePair::OcMc => (1, 2),
            ModePair::OcMr => (1, 0),
            ModePair::MrMc => (0, 2),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModePair::OcMc => "oc_mc",
            ModePair::OcMr => "oc_mr",
            ModePair::MrMc => "mr_mc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EomReport {
    pub oc_mc: CriteriaReport,
    pub oc_mr: CriteriaReport,
    pub mr_mc: CriteriaReport,
}

impl EomReport {
    pub fn get(&self, pair: ModePair) -> &CriteriaReport {
        match pair {
            ModePair::OcMc => &self.oc_mc,
            ModePair::OcMr => &self.oc_mr,
            ModePair::MrMc => &self.mr_mc,
        }
    }
}

pub fn entanglement_report(params: &EomParams) -> Result<EomReport> {
    let state = steady_state(params)?;
    let pair = |p: ModePair| {
        let (i, j) = p.modes();
        report(&BipartiteBlocks::from_state(&state, i, j)?)
    };
    Ok(EomReport {
        oc_mc: pair(ModePair::OcMc)?,
        oc_mr: pair(ModePair::OcMr)?,
        mr_mc: pair(ModePair::MrMc)?,
    })
}

/// λ_SPH of one pair, skipping the entropic quantities.
pub fn lambda_sph_of(params: &EomParams, pair: ModePair) -> Result<f64> {
    let state = steady_state(params)?;
    let (i, j) = pair.modes();
    Ok(crate::criteria::lambda_sph(&BipartiteBlocks::from_state(
        &state, i, j,
    )?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EomAxis {
    /// kelvin
    Temperature,
    /// optical drive wavelength in metres
    Wavelength,
    /// rad/s
    GammaM,
}

impl EomAxis {
    pub fn apply(self, params: &EomParams, value: f64) -> EomParams {
        let mut p = *params;
        match self {
            EomAxis::Temperature => p.temperature = value,
            EomAxis::Wavelength => p = p.with_wavelength(value),
            EomAxis::GammaM => p.gamma_m = value,
        }
        p
    }
}

/// One grid point of a sweep. `report` is `None` when the linearised model
/// has no steady state there; `error` then carries the reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EomSweepPoint {
    pub value: f64,
    pub report: Option<EomReport>,
    pub error: Option<String>,
}

impl EomSweepPoint {
    pub fn stable(&self) -> bool {
        self.report.is_some()
    }
}

pub fn sweep(params: &EomParams, axis: EomAxis, grid: &[f64]) -> Result<Vec<EomSweepPoint>> {
    if grid.is_empty() {
        return Err(validation("sweep", "empty grid"));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(validation("sweep", "grid values must be finite"));
    }
    Ok(grid
        .par_iter()
        .map(
            |&value| match entanglement_report(&axis.apply(params, value)) {
                Ok(r) => EomSweepPoint {
                    value,
                    report: Some(r),
                    error: None,
                },
                Err(e) => EomSweepPoint {
                    value,
                    report: None,
                    error: Some(e.to_string()),
                },
            },
        )
        .collect())
}

/// Outcome of searching for the temperature where entanglement is lost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "kelvin", rename_all = "snake_case")]
pub enum Threshold {
    /// Already separable at the lower end of the bracket.
    NeverEntangled,
    /// Entangled across the whole bracket.
    Beyond(f64),
    /// Entanglement lost between `t` and `t + resolution`.
    At(f64),
}

impl Threshold {
    pub fn kelvin(&self) -> Option<f64> {
        match self {
            Threshold::At(t) => Some(*t),
            _ => None,
        }
    }
}

/// Bisects a monotone "entangled at T" predicate on `[t_lo, t_hi]`.
pub fn bisect_threshold<F>(entangled: F, t_lo: f64, t_hi: f64, resolution: f64) -> Result<Threshold>
where
    F: Fn(f64) -> Result<bool>,
{
    if !(t_hi > t_lo) || !(resolution > 0.0) {
        return Err(Error::Domain(
            "need t_hi > t_lo and a positive resolution".into(),
        ));
    }
    if !entangled(t_lo)? {
        return Ok(Threshold::NeverEntangled);
    }
    if entangled(t_hi)? {
        return Ok(Threshold::Beyond(t_hi));
    }
    let (mut lo, mut hi) = (t_lo, t_hi);
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if entangled(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Threshold::At(lo))
}

/// Temperature at which λ_SPH of `pair` crosses zero.
pub fn separability_threshold(
    params: &EomParams,
    pair: ModePair,
    t_max: f64,
    resolution: f64,
) -> Result<Threshold> {
    bisect_threshold(
        |t| Ok(lambda_sph_of(&params.with_temperature(t), pair)? < 0.0),
        0.0,
        t_max,
        resolution,
    )
}
