//! Linear quantum Langevin systems `u̇ = A u + noise`: diffusion assembly from
//! thermal baths, stability, Lyapunov steady state and transient propagation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::gaussian::{min_hermitian_eigenvalue, scale_of};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;

const STABILITY_MARGIN: f64 = 1e-12;
const LYAPUNOV_TOL: f64 = 1e-9;
const DIFFUSION_TOL: f64 = 1e-10;

/// Mean thermal occupation `1/(exp(ħω/k_B T) − 1)`.
pub fn thermal_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::Domain(format!(
            "frequency must be positive, got {omega}"
        )));
    }
    if !(temperature >= 0.0) {
        return Err(Error::Domain(format!(
            "temperature must be non-negative, got {temperature}"
        )));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (HBAR * omega / (K_B * temperature)).exp_m1())
}

/// How a bath couples into a mode's two quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BathKind {
    /// Noise enters both quadratures.
    Cavity,
    /// Brownian force on the momentum only.
    Mechanical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bath {
    pub kind: BathKind,
    /// Mode frequency in rad/s.
    pub omega: f64,
    /// Energy damping rate in rad/s.
    pub rate: f64,
    /// Kelvin.
    pub temperature: f64,
}

impl Bath {
    pub fn cavity(omega: f64, rate: f64, temperature: f64) -> Self {
        Self {
            kind: BathKind::Cavity,
            omega,
            rate,
            temperature,
        }
    }

    pub fn mechanical(omega: f64, rate: f64, temperature: f64) -> Self {
        Self {
            kind: BathKind::Mechanical,
            omega,
            rate,
            temperature,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rate >= 0.0) || !(self.temperature >= 0.0) || !(self.omega > 0.0) {
            return Err(validation(
                "bath",
                format!(
                    "need rate ≥ 0, T ≥ 0, ω > 0; got rate = {}, T = {}, ω = {}",
                    self.rate, self.temperature, self.omega
                ),
            ));
        }
        Ok(())
    }

    /// `rate·(2N + 1)`, the inflow on each noisy quadrature.
    pub fn inflow(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.rate * (2.0 * thermal_occupation(self.omega, self.temperature)? + 1.0))
    }
}

/// Block-diagonal diffusion matrix, one 2×2 block per bath.
pub fn diffusion_from_baths(baths: &[Bath]) -> Result<DMatrix<f64>> {
    let n = baths.len();
    let mut d = DMatrix::zeros(2 * n, 2 * n);
    for (k, bath) in baths.iter().enumerate() {
        let inflow = bath.inflow()?;
        if bath.kind == BathKind::Cavity {
            d[(2 * k, 2 * k)] = inflow;
        }
        d[(2 * k + 1, 2 * k + 1)] = inflow;
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub stable: bool,
    pub max_real: f64,
    pub max_imag: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearLangevinModel {
    drift: DMatrix<f64>,
    diffusion: DMatrix<f64>,
    labels: Vec<String>,
}

impl LinearLangevinModel {
    pub fn new(drift: DMatrix<f64>, diffusion: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let dim = drift.nrows();
        if drift.ncols() != dim || !dim.is_multiple_of(2) {
            return Err(Error::Dimension {
                expected: dim + dim % 2,
                found: drift.ncols(),
            });
        }
        if diffusion.shape() != (dim, dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: diffusion.nrows(),
            });
        }
        if labels.len() != dim / 2 {
            return Err(Error::Dimension {
                expected: dim / 2,
                found: labels.len(),
            });
        }
        if drift.iter().any(|v| !v.is_finite()) {
            return Err(validation("drift", "non-finite entry"));
        }
        let tol = DIFFUSION_TOL * scale_of(&diffusion);
        let asym = (&diffusion - diffusion.transpose()).amax();
        if asym > tol {
            return Err(validation("diffusion", format!("asymmetry {asym:e}")));
        }
        let zero = DMatrix::zeros(dim, dim);
        let min = min_hermitian_eigenvalue(&diffusion, &zero);
        if min < -tol {
            return Err(validation(
                "diffusion",
                format!("not PSD, min eigenvalue {min:e}"),
            ));
        }
        Ok(Self {
            drift,
            diffusion,
            labels,
        })
    }

    /// Model without labels; modes are named `m0, m1, …`.
    pub fn unlabeled(drift: DMatrix<f64>, diffusion: DMatrix<f64>) -> Result<Self> {
        let labels = (0..drift.nrows() / 2).map(|k| format!("m{k}")).collect();
        Self::new(drift, diffusion, labels)
    }

    pub fn drift(&self) -> &DMatrix<f64> {
        &self.drift
    }

    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.diffusion
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn stability(&self) -> Stability {
        let eig = self.drift.complex_eigenvalues();
        let worst = eig
            .iter()
            .copied()
            .max_by(|a, b| a.re.total_cmp(&b.re))
            .unwrap_or(Complex64::new(f64::NEG_INFINITY, 0.0));
        Stability {
            stable: worst.re < -STABILITY_MARGIN,
            max_real: worst.re,
            max_imag: worst.im,
        }
    }

    pub fn is_stable(&self) -> bool {
        self.stability().stable
    }

    /// Unique solution of `AV + VAᵀ + D = 0`.
    pub fn steady_state_cov(&self) -> Result<DMatrix<f64>> {
        let s = self.stability();
        if !s.stable {
            return Err(Error::Unstable {
                re: s.max_real,
                im: s.max_imag,
            });
        }
        solve_lyapunov(&self.drift, &self.diffusion)
    }

    /// Integrates `dV/dt = AV + VAᵀ + D` from `v0` for `t` seconds.
    pub fn propagate_cov(&self, v0: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        let mut out = self.propagate_checkpoints(v0, &[t])?;
        Ok(out.pop().expect("one checkpoint"))
    }

    /// Covariances at each of the ascending times in `checkpoints`.
    pub fn propagate_checkpoints(
        &self,
        v0: &DMatrix<f64>,
        checkpoints: &[f64],
    ) -> Result<Vec<DMatrix<f64>>> {
        let dim = self.dim();
        if v0.shape() != (dim, dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: v0.nrows(),
            });
        }
        if checkpoints.iter().any(|t| !(*t >= 0.0)) || checkpoints.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain(
                "checkpoint times must be non-negative and ascending".into(),
            ));
        }
        let rhs = |v: &DMatrix<f64>| {
            let av = &self.drift * v;
            &av + av.transpose() + &self.diffusion
        };
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut v = v0.clone();
        let mut t = 0.0;
        let mut h = initial_step(&self.drift);
        for &target in checkpoints {
            if target > t {
                let (nv, nh) = dopri5(&rhs, v, t, target, h)?;
                v = nv;
                h = nh;
                t = target;
            }
            out.push(v.clone());
        }
        Ok(out)
    }
}

const RTOL: f64 = 1e-9;
const ATOL: f64 = 1e-12;

fn initial_step(drift: &DMatrix<f64>) -> f64 {
    let norm = drift.amax().max(1e-300);
    0.01 / norm
}

/// Adaptive Dormand–Prince 5(4) integration of a matrix ODE.
fn dopri5<F>(f: &F, mut y: DMatrix<f64>, t0: f64, t1: f64, h0: f64) -> Result<(DMatrix<f64>, f64)>
where
    F: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    const C: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let mut t = t0;
    let mut h = h0.min(t1 - t0);
    let mut k1 = f(&y);
    let mut last_h = h;
    while t < t1 {
        let min_step = 1e-14 * t.abs().max(t1.abs()).max(f64::MIN_POSITIVE);
        if h < min_step {
            return Err(Error::Stiff { t });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let mut k = vec![k1.clone()];
        for row in C.iter().take(5) {
            let mut yi = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if row[j] != 0.0 {
                    yi += kj * (h * row[j]);
                }
            }
            k.push(f(&yi));
        }
        let mut y5 = y.clone();
        for (j, kj) in k.iter().enumerate() {
            if C[5][j] != 0.0 {
                y5 += kj * (h * C[5][j]);
            }
        }
        let k7 = f(&y5);
        let mut err = &k7 * (h * E[6]);
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err += kj * (h * E[j]);
            }
        }
        let mut ratio: f64 = 0.0;
        for ((e, a), b) in err.iter().zip(y.iter()).zip(y5.iter()) {
            let sc = ATOL + RTOL * a.abs().max(b.abs());
            ratio = ratio.max((e / sc).abs());
        }
        if ratio <= 1.0 {
            t = if last { t1 } else { t + h };
            y = (&y5 + y5.transpose()) * 0.5;
            k1 = k7;
            last_h = h;
            let grow = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= grow;
        } else {
            h *= (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Ok((y, last_h))
}

/// Solves `AX + XAᵀ + D = 0` by complex Schur reduction and triangular
/// back-substitution, followed by one step of residual refinement.
pub fn solve_lyapunov(a: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let a_s = a / scale;
    let ac: DMatrix<Complex64> = a_s.map(|x| Complex64::new(x, 0.0));
    let schur = ac
        .try_schur(1e-15, 10_000)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let (u, t) = schur.unpack();
    let uh = u.adjoint();

    let solve = |rhs: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let f = -(&uh * rhs.map(|x| Complex64::new(x / scale, 0.0)) * &u);
        let y = triangular_lyapunov(&t, &f)?;
        let v = (&u * y * &uh).map(|z| z.re);
        Ok((&v + v.transpose()) * 0.5)
    };

    let mut v = solve(d)?;
    let d_norm = d.amax();
    for _ in 0..3 {
        let r = residual(a, &v, d);
        if r.amax() <= 1e-3 * LYAPUNOV_TOL * d_norm.max(f64::MIN_POSITIVE) {
            break;
        }
        v += solve(&r)?;
    }
    let res = residual(a, &v, d).amax();
    if res > LYAPUNOV_TOL * d_norm && res > 1e-300 {
        return Err(Error::Numerical(format!(
            "Lyapunov residual {res:e} exceeds {:e}",
            LYAPUNOV_TOL * d_norm
        )));
    }
    Ok(v)
}

fn residual(a: &DMatrix<f64>, v: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    let av = a * v;
    &av + av.transpose() + d
}

/// `T Y + Y Tᴴ = F` for upper-triangular `T`.
fn triangular_lyapunov(
    t: &DMatrix<Complex64>,
    f: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    let n = t.nrows();
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for i in (0..n).rev() {
        for j in (0..n).rev() {
            let mut acc = f[(i, j)];
            for k in i + 1..n {
                acc -= t[(i, k)] * y[(k, j)];
            }
            for k in j + 1..n {
                acc -= y[(i, k)] * t[(j, k)].conj();
            }
            let denom = t[(i, i)] + t[(j, j)].conj();
            if denom.norm() < 1e-14 {
                return Err(Error::Numerical(
                    "drift has eigenvalues summing to zero; Lyapunov solution not unique".into(),
                ));
            }
            y[(i, j)] = acc / denom;
        }
    }
    Ok(y)
}
