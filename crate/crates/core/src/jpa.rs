//! Single-junction Josephson parametric amplifier.
//!
//! Frequencies are angular (rad/s); energies passed to the circuit helpers
//! are in joules and converted with `ħ`. The gain follows from inverting the
//! full 2×2 input–output system, so the pump term `|λ₁|²` appears in the
//! determinant and the amplifier has a threshold at `|λ₁| = κ/2`.

use nalgebra::{Matrix2, Matrix3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::BipartiteBlocks;
use crate::error::{validation, Error, Result};
use crate::gaussian::{GaussianState, PhaseSpaceGrid, WignerField};
use crate::langevin::HBAR;

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const PLANCK: f64 = 2.0 * std::f64::consts::PI * HBAR;

/// Gains `g = |λ₁|/κ` of the squeezing sweep; the last one stands in for the
/// threshold value 1/2.
pub const SWEEP_GAINS: [f64; 3] = [0.3, 0.4, 0.45];

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircuitParams {
    /// Charging energy `e²/2C` in joules.
    pub e_c: f64,
    /// Bare frequency `√(8 E_c E_J)/ħ` in rad/s.
    pub omega0: f64,
    /// Kerr coefficient `−E_c/2ħ` in rad/s.
    pub kerr: f64,
}

/// `√(8 E_c E_J)` in whatever (common) units the energies are given in.
pub fn bare_frequency(e_c: f64, e_j: f64) -> f64 {
    (8.0 * e_c * e_j).sqrt()
}

/// Circuit parameters from the Josephson energy (J) and capacitance (F).
pub fn derived_params(e_j: f64, capacitance: f64) -> Result<CircuitParams> {
    if !(e_j > 0.0) || !(capacitance > 0.0) || !e_j.is_finite() || !capacitance.is_finite() {
        return Err(validation(
            "jpa_circuit",
            format!("need E_J > 0 and C > 0, got {e_j}, {capacitance}"),
        ));
    }
    let e_c = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * capacitance);
    Ok(CircuitParams {
        e_c,
        omega0: bare_frequency(e_c, e_j) / HBAR,
        kerr: -0.5 * e_c / HBAR,
    })
}

/// Whether the pump-induced Kerr shift is included when solving for the
/// classical field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSolve {
    #[default]
    SelfConsistent,
    Linear,
}

/// Pumped resonator in angular-frequency units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JpaParams {
    pub omega0: f64,
    /// Kerr coefficient `Λ` (negative for a transmon-like junction).
    pub kerr: f64,
    pub kappa: f64,
    pub omega_p: f64,
    pub epsilon: Complex64,
    #[serde(default)]
    pub solve: FieldSolve,
}

impl JpaParams {
    pub fn from_circuit(
        circuit: &CircuitParams,
        kappa: f64,
        omega_p: f64,
        epsilon: Complex64,
    ) -> Self {
        Self {
            omega0: circuit.omega0,
            kerr: circuit.kerr,
            kappa,
            omega_p,
            epsilon,
            solve: FieldSolve::SelfConsistent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(validation(
                "jpa_params",
                format!("kappa must be positive, got {}", self.kappa),
            ));
        }
        for (name, v) in [
            ("omega0", self.omega0),
            ("kerr", self.kerr),
            ("omega_p", self.omega_p),
        ] {
            if !v.is_finite() {
                return Err(validation("jpa_params", format!("{name} must be finite")));
            }
        }
        if !self.epsilon.re.is_finite() || !self.epsilon.im.is_finite() {
            return Err(validation("jpa_params", "epsilon must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalField {
    pub alpha: Complex64,
    /// Number of positive photon-number solutions; more than one means the
    /// drive sits in the bistable region and the lowest branch was taken.
    pub branch_count: usize,
    pub residual: f64,
}

impl ClassicalField {
    pub fn is_bistable(&self) -> bool {
        self.branch_count > 1
    }
}

/// Steady-state pump amplitude from
/// `α (j(ω₀ − ω_p + 4Λ|α|²) + κ/2) = −jε`, lowest branch.
pub fn classical_field(params: &JpaParams) -> Result<ClassicalField> {
    params.validate()?;
    let eps = params.epsilon;
    let detuning = params.omega0 - params.omega_p;
    let half = 0.5 * params.kappa;
    let field = |n: f64| -J * eps / Complex64::new(half, detuning + 4.0 * params.kerr * n);
    if eps.norm() == 0.0 {
        return Ok(ClassicalField {
            alpha: Complex64::new(0.0, 0.0),
            branch_count: 1,
            residual: 0.0,
        });
    }
    if params.solve == FieldSolve::Linear || params.kerr == 0.0 {
        let alpha = field(0.0);
        let shift = if params.solve == FieldSolve::Linear {
            0.0
        } else {
            4.0 * params.kerr * alpha.norm_sqr()
        };
        let residual =
            (alpha * Complex64::new(half, detuning + shift) + J * eps).norm() / eps.norm();
        return Ok(ClassicalField {
            alpha,
            branch_count: 1,
            residual,
        });
    }
    let roots = photon_number_roots(params.kerr, detuning, half, eps.norm_sqr())?;
    let n = roots[0];
    let alpha = field(n);
    let residual = (alpha * Complex64::new(half, detuning + 4.0 * params.kerr * alpha.norm_sqr())
        + J * eps)
        .norm()
        / eps.norm();
    Ok(ClassicalField {
        alpha,
        branch_count: roots.len(),
        residual,
    })
}

/// Positive roots, ascending, of `n((δ + 4Λn)² + h²) = |ε|²`.
fn photon_number_roots(kerr: f64, detuning: f64, half: f64, drive: f64) -> Result<Vec<f64>> {
    let c3 = 16.0 * kerr * kerr;
    let c2 = 8.0 * kerr * detuning;
    let c1 = detuning * detuning + half * half;
    let c0 = -drive;
    let poly = |n: f64| ((c3 * n + c2) * n + c1) * n + c0;
    let dpoly = |n: f64| (3.0 * c3 * n + 2.0 * c2) * n + c1;
    let companion = Matrix3::new(-c2 / c3, -c1 / c3, -c0 / c3, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    let scale = drive / c1;
    let mut roots: Vec<f64> = companion
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-6 * z.norm().max(scale))
        .map(|z| {
            let mut n = z.re;
            for _ in 0..50 {
                let d = dpoly(n);
                if d == 0.0 {
                    break;
                }
                let step = poly(n) / d;
                n -= step;
                if step.abs() <= 1e-15 * n.abs() {
                    break;
                }
            }
            n
        })
        .filter(|n| *n > 0.0)
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
    if roots.is_empty() {
        return Err(Error::Numerical(
            "classical field: no positive photon-number root".into(),
        ));
    }
    Ok(roots)
}

/// Linearised amplifier around the pump: shifted detuning `Δ₀` and effective
/// pump `λ₁`, both in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplifierParams {
    pub delta0: f64,
    pub lambda1: Complex64,
    pub kappa: f64,
}

impl AmplifierParams {
    /// `Δ₀ = ω₀ + 4|α|²Λ − ω_p`, `λ₁ = 2α²Λ`.
    pub fn from_pump(params: &JpaParams, field: &ClassicalField) -> Self {
        let alpha = field.alpha;
        Self {
            delta0: params.omega0 + 4.0 * alpha.norm_sqr() * params.kerr - params.omega_p,
            lambda1: 2.0 * alpha * alpha * params.kerr,
            kappa: params.kappa,
        }
    }

    /// Resonant amplifier with `|λ₁| = g κ` and pump phase `phase`.
    pub fn resonant(gain_factor: f64, kappa: f64, phase: f64) -> Self {
        Self {
            delta0: 0.0,
            lambda1: Complex64::from_polar(gain_factor * kappa, phase),
            kappa,
        }
    }

    /// `|λ₁| / (κ/2)`; the amplifier is stable below 1.
    pub fn threshold_ratio(&self) -> f64 {
        self.lambda1.norm() / (0.5 * self.kappa)
    }

    pub fn below_threshold(&self) -> bool {
        self.threshold_ratio() < 1.0
    }
}

/// `S(ω) = κ M(ω)⁻¹ − I`; `S[(0,0)]` is the signal amplitude gain and
/// `S[(0,1)]` the idler conversion.
pub fn scattering_matrix(amp: &AmplifierParams, omega: f64) -> Result<Matrix2<Complex64>> {
    if !(amp.kappa > 0.0) {
        return Err(validation(
            "amplifier",
            format!("kappa must be positive, got {}", amp.kappa),
        ));
    }
    let ratio = amp.threshold_ratio();
    if !(ratio < 1.0) {
        return Err(Error::AboveThreshold { ratio });
    }
    let half = Complex64::new(0.5 * amp.kappa, 0.0);
    let m = Matrix2::new(
        -J * (omega + amp.delta0) + half,
        J * amp.lambda1,
        -J * amp.lambda1.conj(),
        J * (omega - amp.delta0) + half,
    );
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if det.norm() == 0.0 {
        return Err(Error::Degenerate("singular amplifier matrix".into()));
    }
    let inv = Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det;
    Ok(inv * Complex64::new(amp.kappa, 0.0) - Matrix2::identity())
}

pub fn power_gain(amp: &AmplifierParams, omega: f64) -> Result<f64> {
    Ok(scattering_matrix(amp, omega)?[(0, 0)].norm_sqr())
}

pub fn power_gain_db(amp: &AmplifierParams, omega: f64) -> Result<f64> {
    Ok(10.0 * power_gain(amp, omega)?.log10())
}

/// Covariance of the degenerate output quadratures at `ω = 0`, for a thermal
/// input of occupation `n_in`.
pub fn output_single_mode(amp: &AmplifierParams, n_in: f64) -> Result<GaussianState> {
    if !(n_in >= 0.0) {
        return Err(validation(
            "thermal_input",
            format!("occupation must be ≥ 0, got {n_in}"),
        ));
    }
    let s = scattering_matrix(amp, 0.0)?;
    let (u, v) = (s[(0, 0)], s[(0, 1)]);
    let (sum, diff) = (u + v, u - v);
    let m = Matrix2::new(sum.re, -diff.im, sum.im, diff.re);
    let cov = m * m.transpose() * (n_in + 0.5);
    GaussianState::from_cov(nalgebra::DMatrix::from_iterator(2, 2, cov.iter().copied()))
}

/// Two-mode squeezed thermal output built from intracavity moments
/// `n_k = ⟨a_k†a_k⟩`, `d₁₂ = ⟨a₁a₂⟩` and the input occupations.
pub fn output_two_mode_cm(
    n1: f64,
    n2: f64,
    d12: Complex64,
    kappa1: f64,
    kappa2: f64,
    n_in1: f64,
    n_in2: f64,
) -> Result<BipartiteBlocks> {
    for (name, v) in [
        ("n1", n1),
        ("n2", n2),
        ("kappa1", kappa1),
        ("kappa2", kappa2),
        ("n_in1", n_in1),
        ("n_in2", n_in2),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(validation(
                "output_moments",
                format!("{name} must be finite and ≥ 0, got {v}"),
            ));
        }
    }
    let bound = n1 * n2 + n1.min(n2);
    if d12.norm_sqr() > bound * (1.0 + 1e-12) + 1e-300 {
        return Err(validation(
            "output_moments",
            format!(
                "|d12|² = {} exceeds n1 n2 + min(n1, n2) = {bound}",
                d12.norm_sqr()
            ),
        ));
    }
    let a = 2.0 * kappa1 * n1 + n_in1 + 0.5;
    let b = 2.0 * kappa2 * n2 + n_in2 + 0.5;
    let d = d12 * (2.0 * (kappa1 * kappa2).sqrt());
    BipartiteBlocks::new(
        Matrix2::identity() * a,
        Matrix2::identity() * b,
        Matrix2::new(d.re, d.im, d.im, -d.re),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqueezingFrame {
    pub gain_factor: f64,
    pub state: GaussianState,
    /// Smallest quadrature variance (minor axis of the ellipse).
    pub minor_variance: f64,
    pub major_variance: f64,
    /// Major axis angle from the q axis, radians.
    pub tilt: f64,
    pub wigner: WignerField,
}

/// Output Wigner functions of a resonant amplifier with `|λ₁| = g κ` for each
/// `g` in `gains`, vacuum input.
pub fn wigner_sweep(
    gains: &[f64],
    grid: &PhaseSpaceGrid,
    phase: f64,
) -> Result<Vec<SqueezingFrame>> {
    gains
        .par_iter()
        .map(|&g| {
            if !(g >= 0.0) {
                return Err(validation("gain_factor", format!("g must be ≥ 0, got {g}")));
            }
            let state = output_single_mode(&AmplifierParams::resonant(g, 1.0, phase), 0.0)?;
            let cov = state.cov();
            let (vq, vp, c) = (cov[(0, 0)], cov[(1, 1)], cov[(0, 1)]);
            let mean = 0.5 * (vq + vp);
            let spread = (0.25 * (vq - vp).powi(2) + c * c).sqrt();
            let wigner = state.wigner(grid)?;
            Ok(SqueezingFrame {
                gain_factor: g,
                minor_variance: mean - spread,
                major_variance: mean + spread,
                tilt: 0.5 * (2.0 * c).atan2(vq - vp),
                wigner,
                state,
            })
        })
        .collect()
}
