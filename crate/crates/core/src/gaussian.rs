//! Multimode Gaussian states in the quadrature picture.
//!
//! Conventions used throughout the crate: `x = (a + a†)/√2`, `p = -i(a - a†)/√2`,
//! ħ = 1, quadratures ordered `(x₁, p₁, x₂, p₂, …)` and the vacuum covariance is
//! `I/2`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{validation, Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const PHYSICALITY_TOL: f64 = 1e-9;
const PURE_TOL: f64 = 1e-12;
const MAX_JITTER: f64 = 1e-12;

/// The symplectic form `Ω = ⊕ [[0, 1], [-1, 0]]` over `n_modes` modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymplecticForm {
    pub n_modes: usize,
}

impl SymplecticForm {
    pub fn new(n_modes: usize) -> Self {
        Self { n_modes }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let dim = 2 * self.n_modes;
        let mut omega = DMatrix::zeros(dim, dim);
        for k in 0..self.n_modes {
            omega[(2 * k, 2 * k + 1)] = 1.0;
            omega[(2 * k + 1, 2 * k)] = -1.0;
        }
        omega
    }
}

/// Largest absolute entry, floored at one. Used to turn absolute tolerances
/// into relative ones for covariances carrying large thermal occupations.
pub(crate) fn scale_of(m: &DMatrix<f64>) -> f64 {
    m.amax().max(1.0)
}

/// Smallest eigenvalue of the Hermitian matrix `re + i·im` (`im` antisymmetric),
/// computed through its real symmetric embedding `[[re, -im], [im, re]]`.
pub(crate) fn min_hermitian_eigenvalue(re: &DMatrix<f64>, im: &DMatrix<f64>) -> f64 {
    let n = re.nrows();
    let mut embed = DMatrix::zeros(2 * n, 2 * n);
    embed.view_mut((0, 0), (n, n)).copy_from(re);
    embed.view_mut((n, n), (n, n)).copy_from(re);
    embed.view_mut((0, n), (n, n)).copy_from(&(-im));
    embed.view_mut((n, 0), (n, n)).copy_from(im);
    let embed = (&embed + embed.transpose()) * 0.5;
    SymmetricEigen::new(embed).eigenvalues.min()
}

fn check_symmetric(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(validation(what, "matrix has non-finite entries"));
    }
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale_of(m) {
        return Err(validation(
            what,
            format!("matrix is not symmetric (max |V - Vᵀ| = {asym:e})"),
        ));
    }
    Ok(())
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symplectic spectrum of an arbitrary real symmetric matrix, ascending.
///
/// The eigenvalues of `ΩV` come in `±iν` pairs; their moduli are sorted and
/// consecutive pairs are averaged.
pub fn symplectic_spectrum(cov: &DMatrix<f64>) -> Vec<f64> {
    let n = cov.nrows() / 2;
    let omega = SymplecticForm::new(n).matrix();
    let mut moduli: Vec<f64> = (omega * cov)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    moduli.sort_by(|a, b| a.total_cmp(b));
    moduli
        .chunks(2)
        .map(|pair| 0.5 * (pair[0] + pair[1]))
        .collect()
}

/// Binary entropy of a single symplectic eigenvalue (vacuum = 1/2):
/// `h(ν) = (ν + ½) log₂(ν + ½) − (ν − ½) log₂(ν − ½)`.
pub fn entropy_function(nu: f64) -> f64 {
    let nu = nu.max(0.5);
    if (nu - 0.5).abs() < PURE_TOL {
        return 0.0;
    }
    let plus = nu + 0.5;
    let minus = nu - 0.5;
    plus * plus.log2() - minus * minus.log2()
}

/// A Gaussian state: first moments and covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Builds a state, checking symmetry and the uncertainty principle
    /// `V + (i/2)Ω ⪰ 0`.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let state = Self::from_parts_unchecked(mean, cov)?;
        state.check_physical()?;
        Ok(state)
    }

    /// Zero-mean state from a covariance matrix.
    pub fn from_cov(cov: DMatrix<f64>) -> Result<Self> {
        let dim = cov.nrows();
        Self::new(DVector::zeros(dim), cov)
    }

    /// Shape, finiteness and symmetry checks only. Physicality is not tested.
    pub(crate) fn from_parts_unchecked(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = cov.nrows();
        if dim == 0 || !dim.is_multiple_of(2) || cov.ncols() != dim {
            return Err(validation(
                "covariance shape",
                format!(
                    "expected a non-empty 2N×2N matrix, got {}×{}",
                    cov.nrows(),
                    cov.ncols()
                ),
            ));
        }
        if mean.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: mean.len(),
            });
        }
        if !mean.iter().all(|v| v.is_finite()) {
            return Err(validation("mean", "mean vector has non-finite entries"));
        }
        check_symmetric(&cov, "covariance symmetry")?;
        Ok(Self {
            mean,
            cov: symmetrize(&cov),
        })
    }

    fn check_physical(&self) -> Result<()> {
        let omega = SymplecticForm::new(self.n_modes()).matrix();
        let min_eig = min_hermitian_eigenvalue(&self.cov, &(omega * 0.5));
        if min_eig < -PHYSICALITY_TOL * scale_of(&self.cov) {
            return Err(validation(
                "physicality",
                format!(
                    "V + (i/2)Ω has eigenvalue {min_eig:e} < 0 (uncertainty principle violated)"
                ),
            ));
        }
        Ok(())
    }

    pub fn vacuum(n_modes: usize) -> Self {
        let dim = 2 * n_modes;
        Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim) * 0.5,
        }
    }

    /// Single-mode thermal state with mean occupation `n_bar`.
    pub fn thermal(n_bar: f64) -> Result<Self> {
        if !(n_bar >= 0.0) || !n_bar.is_finite() {
            return Err(Error::Domain(format!(
                "thermal occupation must be >= 0, got {n_bar}"
            )));
        }
        Ok(Self {
            mean: DVector::zeros(2),
            cov: DMatrix::identity(2, 2) * (n_bar + 0.5),
        })
    }

    /// Single-mode squeezed vacuum, `x` squeezed for `r > 0`.
    pub fn squeezed_vacuum(r: f64) -> Self {
        Self {
            mean: DVector::zeros(2),
            cov: DMatrix::from_diagonal(&DVector::from_vec(vec![
                0.5 * (-2.0 * r).exp(),
                0.5 * (2.0 * r).exp(),
            ])),
        }
    }

    /// Two-mode squeezed vacuum: local variances `cosh 2r / 2`, cross terms
    /// `± sinh 2r / 2` with the `σ_z` sign pattern.
    pub fn two_mode_squeezed_vacuum(r: f64) -> Self {
        let c = 0.5 * (2.0 * r).cosh();
        let s = 0.5 * (2.0 * r).sinh();
        Self {
            mean: DVector::zeros(4),
            cov: DMatrix::from_row_slice(
                4,
                4,
                &[
                    c, 0.0, s, 0.0, 0.0, c, 0.0, -s, s, 0.0, c, 0.0, 0.0, -s, 0.0, c,
                ],
            ),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.cov.nrows() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Reduced state of a subset of modes, in the given order.
    pub fn reduced(&self, modes: &[usize]) -> Result<Self> {
        let n = self.n_modes();
        for &m in modes {
            if m >= n {
                return Err(Error::ModeIndex {
                    index: m,
                    n_modes: n,
                });
            }
        }
        let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let k = idx.len();
        let cov = DMatrix::from_fn(k, k, |i, j| self.cov[(idx[i], idx[j])]);
        let mean = DVector::from_fn(k, |i, _| self.mean[idx[i]]);
        Ok(Self { mean, cov })
    }

    /// Symplectic eigenvalues, ascending.
    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        symplectic_spectrum(&self.cov)
    }

    /// Conjugation by `diag(1, -1)` on one mode: the covariance-level partial
    /// transpose with respect to that mode.
    pub fn partial_transpose(&self, mode: usize) -> Result<Self> {
        let n = self.n_modes();
        if mode >= n {
            return Err(Error::ModeIndex {
                index: mode,
                n_modes: n,
            });
        }
        let p = 2 * mode + 1;
        let mut cov = self.cov.clone();
        for k in 0..cov.nrows() {
            if k != p {
                cov[(p, k)] = -cov[(p, k)];
                cov[(k, p)] = -cov[(k, p)];
            }
        }
        let mut mean = self.mean.clone();
        mean[p] = -mean[p];
        Ok(Self { mean, cov })
    }

    /// Von Neumann entropy in bits.
    pub fn von_neumann_entropy(&self) -> f64 {
        self.symplectic_eigenvalues()
            .into_iter()
            .map(entropy_function)
            .sum()
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        self.symplectic_eigenvalues()
            .iter()
            .all(|nu| (nu - 0.5).abs() <= tol)
    }

    /// Evaluates the Wigner function of a single-mode state on a grid.
    pub fn wigner(&self, grid: &PhaseSpaceGrid) -> Result<WignerField> {
        if self.n_modes() != 1 {
            return Err(Error::Dimension {
                expected: 2,
                found: self.cov.nrows(),
            });
        }
        let det = self.cov.determinant();
        if det < 1e-300 {
            return Err(Error::Degenerate(format!(
                "covariance determinant {det:e} too small for a Wigner density"
            )));
        }
        let inv = self
            .cov
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("covariance is singular".into()))?;
        let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
        let (mq, mp) = (self.mean[0], self.mean[1]);
        let values = DMatrix::from_fn(grid.q.len(), grid.p.len(), |i, j| {
            let dq = grid.q[i] - mq;
            let dp = grid.p[j] - mp;
            let quad = inv[(0, 0)] * dq * dq + 2.0 * inv[(0, 1)] * dq * dp + inv[(1, 1)] * dp * dp;
            norm * (-0.5 * quad).exp()
        });
        Ok(WignerField {
            q: grid.q.clone(),
            p: grid.p.clone(),
            values,
        })
    }

    /// Draws `n_samples` quadrature records (rows) from the state's
    /// distribution. Deterministic for a given `(state, seed)`.
    pub fn sample(&self, n_samples: usize, seed: u64) -> Result<DMatrix<f64>> {
        self.sample_with_noise(n_samples, seed, 0.0)
    }

    /// Like [`sample`](Self::sample) with `added_variance` added to every
    /// quadrature variance (e.g. 1/2 for heterodyne detection).
    pub fn sample_with_noise(
        &self,
        n_samples: usize,
        seed: u64,
        added_variance: f64,
    ) -> Result<DMatrix<f64>> {
        if n_samples == 0 {
            return Err(Error::Domain("n_samples must be at least 1".into()));
        }
        let sampler = self.sampler(added_variance)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = sampler.dim();
        let mut out = DMatrix::zeros(n_samples, dim);
        let mut x = vec![0.0; dim];
        for row in 0..n_samples {
            sampler.draw(&mut rng, &mut x);
            for (k, v) in x.iter().enumerate() {
                out[(row, k)] = *v;
            }
        }
        Ok(out)
    }

    /// Reusable draw source for this state with `added_variance` on every
    /// quadrature.
    pub fn sampler(&self, added_variance: f64) -> Result<Sampler> {
        if !(added_variance >= 0.0) {
            return Err(Error::Domain(format!(
                "added variance must be >= 0, got {added_variance}"
            )));
        }
        let dim = self.cov.nrows();
        if dim > MAX_SAMPLER_DIM {
            return Err(Error::Dimension {
                expected: MAX_SAMPLER_DIM,
                found: dim,
            });
        }
        let cov = &self.cov + DMatrix::identity(dim, dim) * added_variance;
        let factor = sampling_factor(&cov)?;
        Ok(Sampler {
            dim,
            factor: (0..dim * dim).map(|k| factor[(k / dim, k % dim)]).collect(),
            mean: self.mean.iter().copied().collect(),
        })
    }

    /// Applies a channel acting on all modes.
    pub fn apply_channel(&self, channel: &GaussianChannel) -> Result<Self> {
        let dim = self.cov.nrows();
        if channel.x.nrows() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: channel.x.nrows(),
            });
        }
        channel.check_complete_positivity()?;
        let mean = &channel.x * &self.mean;
        let cov = &channel.x * &self.cov * channel.x.transpose() + &channel.y;
        Self::new(mean, symmetrize(&cov))
    }

    /// Applies a channel to a contiguous block of modes starting at `first_mode`,
    /// leaving the other modes untouched.
    pub fn apply_channel_to_mode(
        &self,
        channel: &GaussianChannel,
        first_mode: usize,
    ) -> Result<Self> {
        let lifted = channel.embed(self.n_modes(), first_mode)?;
        self.apply_channel(&lifted)
    }
}

const MAX_SAMPLER_DIM: usize = 16;

/// Draws Gaussian quadrature records `x = mean + L z`.
#[derive(Debug, Clone)]
pub struct Sampler {
    dim: usize,
    factor: Vec<f64>,
    mean: Vec<f64>,
}

impl Sampler {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fills `out` (length `dim`) with one record.
    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let mut z = [0.0f64; MAX_SAMPLER_DIM];
        let z = &mut z[..self.dim];
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.factor[i * self.dim..(i + 1) * self.dim];
            *o = self.mean[i] + row.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// Lower factor `L` with `L Lᵀ ≈ cov`, by Cholesky with a small diagonal
/// jitter and an eigendecomposition fallback for semidefinite matrices.
fn sampling_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cov = symmetrize(cov);
    let scale = scale_of(&cov);
    let eig = SymmetricEigen::new(cov.clone());
    let min_eig = eig.eigenvalues.min();
    if min_eig < -PHYSICALITY_TOL * scale {
        return Err(validation(
            "positive semidefinite covariance",
            format!("covariance has eigenvalue {min_eig:e}"),
        ));
    }
    let dim = cov.nrows();
    let mut jitter = 0.0;
    loop {
        let trial = &cov + DMatrix::identity(dim, dim) * (jitter * scale);
        if let Some(ch) = trial.cholesky() {
            return Ok(ch.l());
        }
        jitter = if jitter == 0.0 { 1e-15 } else { jitter * 10.0 };
        if jitter > MAX_JITTER {
            break;
        }
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// Rectangular lattice of phase-space points.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhaseSpaceGrid {
    /// Square grid from `min` to `max` (inclusive) with spacing `step` on both axes.
    pub fn square(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(max > min) || !min.is_finite() || !max.is_finite() {
            return Err(Error::Domain(format!(
                "invalid grid [{min}, {max}] with step {step}"
            )));
        }
        let n = ((max - min) / step).round() as usize + 1;
        let axis: Vec<f64> = (0..n).map(|k| min + k as f64 * step).collect();
        Ok(Self {
            q: axis.clone(),
            p: axis,
        })
    }

    pub fn len(&self) -> usize {
        self.q.len() * self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Wigner density sampled on a grid; `values[(i, j)] = W(q[i], p[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerField {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub values: DMatrix<f64>,
}

impl WignerField {
    /// Riemann sum of the density; assumes uniform spacing.
    pub fn riemann_sum(&self) -> f64 {
        let dq = if self.q.len() > 1 {
            self.q[1] - self.q[0]
        } else {
            1.0
        };
        let dp = if self.p.len() > 1 {
            self.p[1] - self.p[0]
        } else {
            1.0
        };
        self.values.sum() * dq * dp
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }
}

/// Affine covariance map `V → X V Xᵀ + Y`, `d → X d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianChannel {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub description: String,
}

impl GaussianChannel {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>, description: impl Into<String>) -> Result<Self> {
        let dim = x.nrows();
        if dim == 0 || !dim.is_multiple_of(2) || x.ncols() != dim {
            return Err(validation(
                "channel shape",
                format!("X must be 2N×2N, got {}×{}", x.nrows(), x.ncols()),
            ));
        }
        if y.nrows() != dim || y.ncols() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: y.nrows(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(validation("channel scaling", "X has non-finite entries"));
        }
        check_symmetric(&y, "channel noise symmetry")?;
        Ok(Self {
            x,
            y: symmetrize(&y),
            description: description.into(),
        })
    }

    pub fn identity(n_modes: usize) -> Self {
        let dim = 2 * n_modes;
        Self {
            x: DMatrix::identity(dim, dim),
            y: DMatrix::zeros(dim, dim),
            description: "identity".into(),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.x.nrows() / 2
    }

    /// Checks `Y + (i/2)(Ω − XΩXᵀ) ⪰ 0`.
    pub fn check_complete_positivity(&self) -> Result<()> {
        let omega = SymplecticForm::new(self.n_modes()).matrix();
        let im = (&omega - &self.x * &omega * self.x.transpose()) * 0.5;
        let min_eig = min_hermitian_eigenvalue(&self.y, &im);
        if min_eig < -PHYSICALITY_TOL * scale_of(&self.y) {
            return Err(Error::UnphysicalChannel(format!(
                "{}: Y + (i/2)(Ω − XΩXᵀ) has eigenvalue {min_eig:e}",
                self.description
            )));
        }
        Ok(())
    }

    /// The channel obtained by applying `self` first and then `next`:
    /// `(X₂X₁, X₂Y₁X₂ᵀ + Y₂)`.
    pub fn then(&self, next: &GaussianChannel) -> Result<Self> {
        if self.x.nrows() != next.x.nrows() {
            return Err(Error::Dimension {
                expected: self.x.nrows(),
                found: next.x.nrows(),
            });
        }
        let x = &next.x * &self.x;
        let y = &next.x * &self.y * next.x.transpose() + &next.y;
        Ok(Self {
            x,
            y: symmetrize(&y),
            description: format!("{} -> {}", self.description, next.description),
        })
    }

    /// Lifts this channel onto modes `first_mode..first_mode + self.n_modes()`
    /// of an `n_modes`-mode system; identity on the rest.
    pub fn embed(&self, n_modes: usize, first_mode: usize) -> Result<Self> {
        let k = self.n_modes();
        if first_mode + k > n_modes {
            return Err(Error::ModeIndex {
                index: first_mode + k - 1,
                n_modes,
            });
        }
        let dim = 2 * n_modes;
        let mut x = DMatrix::identity(dim, dim);
        let mut y = DMatrix::zeros(dim, dim);
        let off = 2 * first_mode;
        x.view_mut((off, off), (2 * k, 2 * k)).copy_from(&self.x);
        y.view_mut((off, off), (2 * k, 2 * k)).copy_from(&self.y);
        Ok(Self {
            x,
            y,
            description: self.description.clone(),
        })
    }
}

/// Random symplectic matrix drawn as `O₁ · diag(e^{-r₁}, e^{r₁}, …) · O₂`
/// with Haar-random passive transformations `O₁, O₂` and squeezing
/// parameters uniform in `[0, max_squeezing]`.
pub fn random_symplectic<R: rand::Rng + ?Sized>(
    n_modes: usize,
    max_squeezing: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    let o1 = random_passive(n_modes, rng);
    let o2 = random_passive(n_modes, rng);
    let mut squeeze = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        let r = rng.random_range(0.0..=max_squeezing);
        squeeze[(2 * k, 2 * k)] = (-r).exp();
        squeeze[(2 * k + 1, 2 * k + 1)] = r.exp();
    }
    o1 * squeeze * o2
}

/// Orthogonal symplectic matrix from a Haar-random unitary (QR of a complex
/// Ginibre matrix with phase correction).
fn random_passive<R: rand::Rng + ?Sized>(n_modes: usize, rng: &mut R) -> DMatrix<f64> {
    use num_complex::Complex64;
    let g = DMatrix::from_fn(n_modes, n_modes, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..n_modes {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n_modes {
            u[(i, j)] *= phase;
        }
    }
    // a → U a  ⇒  x → Re U x − Im U p,  p → Im U x + Re U p
    DMatrix::from_fn(2 * n_modes, 2 * n_modes, |i, j| {
        let (mi, qi) = (i / 2, i % 2);
        let (mj, qj) = (j / 2, j % 2);
        let z = u[(mi, mj)];
        match (qi, qj) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    })
}

/// Random physical covariance `S · diag(ν) · Sᵀ` with symplectic eigenvalues
/// uniform in `[1/2, max_nu]`.
pub fn random_physical_cov<R: rand::Rng + ?Sized>(
    n_modes: usize,
    max_nu: f64,
    max_squeezing: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    let s = random_symplectic(n_modes, max_squeezing, rng);
    let mut d = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        let nu = rng.random_range(0.5..=max_nu.max(0.5));
        d[(2 * k, 2 * k)] = nu;
        d[(2 * k + 1, 2 * k + 1)] = nu;
    }
    let v = &s * d * s.transpose();
    symmetrize(&v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmsv(r: f64) -> GaussianState {
        GaussianState::two_mode_squeezed_vacuum(r)
    }

    #[test]
    fn symplectic_form_squares_to_minus_identity() {
        let omega = SymplecticForm::new(3).matrix();
        assert_eq!(&omega * &omega, -DMatrix::<f64>::identity(6, 6));
        assert_eq!(omega.transpose(), -omega);
    }

    #[test]
    fn vacuum_and_thermal_spectra() {
        let v = GaussianState::vacuum(1).symplectic_eigenvalues();
        assert!((v[0] - 0.5).abs() < 1e-14);
        let t = GaussianState::thermal(1.0)
            .unwrap()
            .symplectic_eigenvalues();
        assert!((t[0] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn tmsv_is_pure() {
        let nu = tmsv(0.5).symplectic_eigenvalues();
        assert_eq!(nu.len(), 2);
        for v in nu {
            assert!((v - 0.5).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn partial_transpose_of_tmsv() {
        let r: f64 = 0.5;
        let pt = tmsv(r).partial_transpose(1).unwrap();
        let nu = symplectic_spectrum(pt.cov());
        assert!((nu[0] - 0.5 * (-2.0 * r).exp()).abs() < 1e-12);
        assert!((nu[0] - 0.18393972058572117).abs() < 1e-12);
    }

    #[test]
    fn partial_transpose_is_involution() {
        let s = tmsv(0.3);
        let back = s
            .partial_transpose(0)
            .unwrap()
            .partial_transpose(0)
            .unwrap();
        assert_eq!(back, s);
        assert_eq!(
            GaussianState::vacuum(1).partial_transpose(0).unwrap(),
            GaussianState::vacuum(1)
        );
        assert!(matches!(
            s.partial_transpose(2),
            Err(Error::ModeIndex { .. })
        ));
    }

    #[test]
    fn entropy_values() {
        assert_eq!(GaussianState::vacuum(2).von_neumann_entropy(), 0.0);
        let s = GaussianState::thermal(1.0).unwrap().von_neumann_entropy();
        assert!((s - 2.0).abs() < 1e-12);
        assert!(tmsv(0.8).von_neumann_entropy().abs() < 1e-9);
        assert_eq!(entropy_function(0.5 - 1e-13), 0.0);
    }

    #[test]
    fn rejects_non_symmetric_and_unphysical() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.5]);
        let err = GaussianState::from_cov(cov).unwrap_err();
        assert!(matches!(
            err,
            Error::Validation {
                invariant: "covariance symmetry",
                ..
            }
        ));
        let cov = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.1]);
        let err = GaussianState::from_cov(cov).unwrap_err();
        assert!(matches!(
            err,
            Error::Validation {
                invariant: "physicality",
                ..
            }
        ));
        let cov = DMatrix::from_row_slice(2, 2, &[f64::NAN, 0.0, 0.0, 0.5]);
        assert!(GaussianState::from_cov(cov).is_err());
    }

    #[test]
    fn wigner_vacuum_peak_and_normalization() {
        let grid = PhaseSpaceGrid::square(-6.0, 6.0, 0.05).unwrap();
        let w = GaussianState::vacuum(1).wigner(&grid).unwrap();
        let origin = GaussianState::vacuum(1)
            .wigner(&PhaseSpaceGrid {
                q: vec![0.0],
                p: vec![0.0],
            })
            .unwrap();
        assert!((origin.values[(0, 0)] - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        assert!((w.riemann_sum() - 1.0).abs() < 1e-3);
        assert!(w.values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn wigner_squeezed_has_vacuum_peak() {
        let s = GaussianState::squeezed_vacuum(0.5);
        let w = s
            .wigner(&PhaseSpaceGrid {
                q: vec![0.0],
                p: vec![0.0],
            })
            .unwrap();
        assert!((w.values[(0, 0)] - 1.0 / std::f64::consts::PI).abs() < 1e-14);
        let far_q = s
            .wigner(&PhaseSpaceGrid {
                q: vec![1.0],
                p: vec![0.0],
            })
            .unwrap();
        let far_p = s
            .wigner(&PhaseSpaceGrid {
                q: vec![0.0],
                p: vec![1.0],
            })
            .unwrap();
        // elongated along the anti-squeezed p axis
        assert!(far_p.values[(0, 0)] > far_q.values[(0, 0)]);
    }

    #[test]
    fn wigner_rejects_degenerate_and_multimode() {
        let s =
            GaussianState::from_parts_unchecked(DVector::zeros(2), DMatrix::zeros(2, 2)).unwrap();
        let grid = PhaseSpaceGrid::square(-1.0, 1.0, 0.5).unwrap();
        assert!(matches!(s.wigner(&grid), Err(Error::Degenerate(_))));
        assert!(GaussianState::vacuum(2).wigner(&grid).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = tmsv(0.5);
        assert!(s.sample(0, 1).is_err());
        let a = s.sample(1, 42).unwrap();
        let b = s.sample(1, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, s.sample(1, 43).unwrap());
    }

    #[test]
    fn vacuum_sample_variance() {
        let n = 100_000;
        let draws = GaussianState::vacuum(1).sample(n, 7).unwrap();
        for col in 0..2 {
            let c = draws.column(col);
            let mean = c.mean();
            let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            assert!((var - 0.5).abs() < 0.015 * 0.5, "variance {var}");
        }
    }

    #[test]
    fn tmsv_sample_correlation() {
        let r: f64 = 0.5;
        let n = 100_000;
        let draws = tmsv(r).sample(n, 11).unwrap();
        let xs = draws.column(0);
        let xi = draws.column(2);
        let (ms, mi) = (xs.mean(), xi.mean());
        let cov: f64 = xs
            .iter()
            .zip(xi.iter())
            .map(|(a, b)| (a - ms) * (b - mi))
            .sum::<f64>();
        let vs: f64 = xs.iter().map(|a| (a - ms).powi(2)).sum();
        let vi: f64 = xi.iter().map(|b| (b - mi).powi(2)).sum();
        let rho = cov / (vs * vi).sqrt();
        let expected = (2.0 * r).tanh();
        let se = (1.0 - expected * expected) / (n as f64).sqrt();
        assert!((rho - expected).abs() < 3.0 * se, "rho {rho} vs {expected}");
    }

    #[test]
    fn sampling_handles_pure_semidefinite_covariance() {
        // a pure TMSV has a full-rank covariance, but an infinitely squeezed
        // limit does not; V = 0 must still sample (all zeros)
        let s =
            GaussianState::from_parts_unchecked(DVector::zeros(2), DMatrix::zeros(2, 2)).unwrap();
        let d = s.sample(3, 0).unwrap();
        assert!(d.amax() < 1e-5);
    }

    fn loss(tau: f64, n_b: f64) -> GaussianChannel {
        GaussianChannel::new(
            DMatrix::identity(2, 2) * tau.sqrt(),
            DMatrix::identity(2, 2) * ((1.0 - tau) * (n_b + 0.5)),
            "loss",
        )
        .unwrap()
    }

    #[test]
    fn channel_application() {
        let vac = GaussianState::vacuum(1);
        assert_eq!(
            vac.apply_channel(&GaussianChannel::identity(1)).unwrap(),
            vac
        );
        assert_eq!(vac.apply_channel(&loss(1.0, 3.0)).unwrap(), vac);
        let out = vac.apply_channel(&loss(0.5, 1.0)).unwrap();
        assert!((out.cov()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((out.cov()[(1, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn channel_errors() {
        let bad = GaussianChannel::new(DMatrix::identity(2, 2) * 0.5, DMatrix::zeros(2, 2), "bad")
            .unwrap();
        assert!(matches!(
            GaussianState::vacuum(1).apply_channel(&bad),
            Err(Error::UnphysicalChannel(_))
        ));
        assert!(matches!(
            GaussianState::vacuum(2).apply_channel(&loss(0.5, 0.0)),
            Err(Error::Dimension { .. })
        ));
        assert!(GaussianState::vacuum(2)
            .apply_channel_to_mode(&loss(0.5, 0.0), 1)
            .is_ok());
        assert!(GaussianState::vacuum(2)
            .apply_channel_to_mode(&loss(0.5, 0.0), 2)
            .is_err());
    }

    #[test]
    fn channel_composition_matches_sequential_application() {
        let s = tmsv(0.4);
        let c1 = loss(0.7, 0.3).embed(2, 0).unwrap();
        let c2 = loss(0.4, 2.0).embed(2, 0).unwrap();
        let seq = s.apply_channel(&c1).unwrap().apply_channel(&c2).unwrap();
        let comp = s.apply_channel(&c1.then(&c2).unwrap()).unwrap();
        assert!((seq.cov() - comp.cov()).amax() < 1e-12);
    }

    #[test]
    fn random_symplectic_preserves_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..4 {
            let s = random_symplectic(n, 1.0, &mut rng);
            let omega = SymplecticForm::new(n).matrix();
            assert!((&s * &omega * s.transpose() - &omega).amax() < 1e-12);
        }
    }

    #[test]
    fn symplectic_eigenvalues_invariant_under_symplectic_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let v = random_physical_cov(3, 4.0, 1.0, &mut rng);
            let s = random_symplectic(3, 0.8, &mut rng);
            let w = &s * &v * s.transpose();
            let a = symplectic_spectrum(&v);
            let b = symplectic_spectrum(&w);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-8 * x.max(1.0), "{x} vs {y}");
            }
            assert!(GaussianState::from_cov(v).is_ok());
        }
    }
}
