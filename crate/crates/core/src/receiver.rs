//! Digital correlation receiver for quantum illumination.
//!
//! Mode 0 is the signal (sent towards the target), mode 1 the retained idler.
//! Each decision draws `samples_per_decision` quadrature records, forms a
//! scalar statistic and compares it with a threshold; sweeping the threshold
//! over many decisions per hypothesis yields the ROC curve.

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::thermal_loss;
use crate::error::{validation, Error, Result};
use crate::gaussian::{GaussianChannel, GaussianState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    /// `mean(x_R x_I − p_R p_I)`, matched to the sign pattern of the
    /// signal–idler correlations.
    #[default]
    Covariance,
    /// `mean(x_R² + p_R²)`; ignores the idler.
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hypothesis {
    Absent,
    Present,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QiScenario {
    pub squeezing: f64,
    /// Applied to the signal when the target is present.
    pub signal_channel: GaussianChannel,
    /// Applied to the signal when the target is absent.
    pub background_channel: GaussianChannel,
    pub samples_per_decision: usize,
    pub n_decisions: usize,
    pub seed: u64,
    pub detector: Detector,
    /// Adds half a vacuum unit to every measured quadrature.
    pub heterodyne: bool,
}

impl QiScenario {
    /// Target of power reflectivity `reflectivity` embedded in thermal light
    /// whose level is matched between the two hypotheses: the return sees
    /// `n_b/(1−reflectivity)`, the empty scene `n_b`.
    pub fn thermal_target(
        squeezing: f64,
        reflectivity: f64,
        n_b: f64,
        samples_per_decision: usize,
        n_decisions: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(reflectivity < 1.0) {
            return Err(validation(
                "reflectivity",
                format!("must be below 1, got {reflectivity}"),
            ));
        }
        let scenario = Self {
            squeezing,
            signal_channel: thermal_loss(reflectivity, n_b / (1.0 - reflectivity))?,
            background_channel: thermal_loss(0.0, n_b)?,
            samples_per_decision,
            n_decisions,
            seed,
            detector: Detector::Covariance,
            heterodyne: true,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Weak signal (`sinh²r = 0.01`) against a bright background (`n_B = 10`).
    pub fn low_signal_high_noise() -> Self {
        Self::thermal_target(0.1f64.asinh(), 0.5, 10.0, 2000, 10_000, 20_241)
            .expect("preset parameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.squeezing >= 0.0) || !self.squeezing.is_finite() {
            return Err(validation(
                "squeezing",
                format!("r must be finite and ≥ 0, got {}", self.squeezing),
            ));
        }
        if self.samples_per_decision == 0 || self.n_decisions == 0 {
            return Err(validation(
                "counts",
                "samples_per_decision and n_decisions must be ≥ 1",
            ));
        }
        for c in [&self.signal_channel, &self.background_channel] {
            if c.n_modes() != 1 {
                return Err(validation(
                    "channel",
                    format!("expected a single-mode channel, got {} modes", c.n_modes()),
                ));
            }
        }
        Ok(())
    }

    pub fn channel(&self, h: Hypothesis) -> &GaussianChannel {
        match h {
            Hypothesis::Absent => &self.background_channel,
            Hypothesis::Present => &self.signal_channel,
        }
    }

    /// Mean signal photon number `sinh²r`.
    pub fn signal_photons(&self) -> f64 {
        self.squeezing.sinh().powi(2)
    }
}

pub fn tmsv_cm(r: f64) -> Result<GaussianState> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(validation(
            "squeezing",
            format!("r must be finite and ≥ 0, got {r}"),
        ));
    }
    Ok(GaussianState::two_mode_squeezed_vacuum(r))
}

/// `Cov(x_s, x_i)/√(Var x_s Var x_i)` between modes 0 and 1.
pub fn correlation_coefficient(state: &GaussianState) -> Result<f64> {
    if state.n_modes() != 2 {
        return Err(Error::Dimension {
            expected: 4,
            found: state.cov().nrows(),
        });
    }
    let v = state.cov();
    let denom = (v[(0, 0)] * v[(2, 2)]).sqrt();
    if !(denom > 0.0) {
        return Err(Error::Degenerate("zero quadrature variance".into()));
    }
    Ok(v[(0, 2)] / denom)
}

/// Signal–idler state seen by the receiver under hypothesis `h`.
pub fn received_state(scenario: &QiScenario, h: Hypothesis) -> Result<GaussianState> {
    tmsv_cm(scenario.squeezing)?.apply_channel_to_mode(scenario.channel(h), 0)
}

/// Coherent transmitter with the same mean photon number, after the channel.
pub fn received_coherent(scenario: &QiScenario, h: Hypothesis) -> Result<GaussianState> {
    let sent = GaussianState::new(
        DVector::from_vec(vec![reference_amplitude(scenario), 0.0]),
        DMatrix::identity(2, 2) * 0.5,
    )?;
    sent.apply_channel(scenario.channel(h))
}

fn reference_amplitude(scenario: &QiScenario) -> f64 {
    std::f64::consts::SQRT_2 * scenario.squeezing.sinh()
}

/// Seed of decision `k` under hypothesis `h`, split from the scenario seed by
/// stream so that every decision is independent of evaluation order.
pub fn decision_seed(seed: u64, h: Hypothesis, k: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * k as u64 + matches!(h, Hypothesis::Present) as u64);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionSamples {
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
    /// Sample correlation of `(x_s, x_i)` over every target-present record,
    /// before measurement noise. Absent for the classical transmitter.
    pub rho_empirical: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    a: f64,
    b: f64,
    ab: f64,
    aa: f64,
    bb: f64,
}

impl Moments {
    fn push(&mut self, a: f64, b: f64) {
        self.n += 1.0;
        self.a += a;
        self.b += b;
        self.ab += a * b;
        self.aa += a * a;
        self.bb += b * b;
    }

    fn merge(self, o: Self) -> Self {
        Self {
            n: self.n + o.n,
            a: self.a + o.a,
            b: self.b + o.b,
            ab: self.ab + o.ab,
            aa: self.aa + o.aa,
            bb: self.bb + o.bb,
        }
    }

    fn correlation(&self) -> f64 {
        let (ma, mb) = (self.a / self.n, self.b / self.n);
        let cov = self.ab / self.n - ma * mb;
        cov / ((self.aa / self.n - ma * ma) * (self.bb / self.n - mb * mb)).sqrt()
    }
}

fn statistic(detector: Detector, ret: [f64; 2], reference: [f64; 2]) -> f64 {
    match detector {
        Detector::Covariance => ret[0] * reference[0] - ret[1] * reference[1],
        Detector::Energy => ret[0] * ret[0] + ret[1] * ret[1],
    }
}

fn noise_scale(scenario: &QiScenario) -> f64 {
    if scenario.heterodyne {
        0.5f64.sqrt()
    } else {
        0.0
    }
}

/// Statistic samples for the entangled transmitter under both hypotheses.
pub fn run_detection(scenario: &QiScenario) -> Result<DetectionSamples> {
    scenario.validate()?;
    let noise = noise_scale(scenario);
    let m = scenario.samples_per_decision;
    let run = |h: Hypothesis| -> Result<Vec<(f64, Moments)>> {
        let sampler = received_state(scenario, h)?.sampler(0.0)?;
        Ok((0..scenario.n_decisions)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(decision_seed(scenario.seed, h, k));
                let mut x = [0.0; 4];
                let mut acc = 0.0;
                let mut moments = Moments::default();
                for _ in 0..m {
                    sampler.draw(&mut rng, &mut x);
                    moments.push(x[0], x[2]);
                    let mut y = x;
                    for v in y.iter_mut() {
                        let n: f64 = StandardNormal.sample(&mut rng);
                        *v += noise * n;
                    }
                    // Idler conjugation is folded into the statistic's sign.
                    let reference = match scenario.detector {
                        Detector::Covariance => [y[2], y[3]],
                        Detector::Energy => [0.0, 0.0],
                    };
                    acc += statistic(scenario.detector, [y[0], y[1]], reference);
                }
                (acc / m as f64, moments)
            })
            .collect())
    };
    let h0 = run(Hypothesis::Absent)?;
    let h1 = run(Hypothesis::Present)?;
    let moments = h1
        .iter()
        .fold(Moments::default(), |acc, (_, m)| acc.merge(*m));
    Ok(DetectionSamples {
        h0: h0.into_iter().map(|(t, _)| t).collect(),
        h1: h1.into_iter().map(|(t, _)| t).collect(),
        rho_empirical: Some(moments.correlation()),
    })
}

/// Classical comparator: a coherent state with `sinh²r` photons, correlated
/// against the known transmitted amplitude. Uses the same decision seeds as
/// [`run_detection`].
pub fn ci_baseline(scenario: &QiScenario) -> Result<DetectionSamples> {
    scenario.validate()?;
    let noise = noise_scale(scenario);
    let m = scenario.samples_per_decision;
    let amplitude = reference_amplitude(scenario);
    let run = |h: Hypothesis| -> Result<Vec<f64>> {
        let sampler = received_coherent(scenario, h)?.sampler(0.0)?;
        Ok((0..scenario.n_decisions)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(decision_seed(scenario.seed, h, k));
                let mut x = [0.0; 2];
                let mut acc = 0.0;
                for _ in 0..m {
                    sampler.draw(&mut rng, &mut x);
                    for v in x.iter_mut() {
                        let n: f64 = StandardNormal.sample(&mut rng);
                        *v += noise * n;
                    }
                    acc += statistic(scenario.detector, x, [amplitude, 0.0]);
                }
                acc / m as f64
            })
            .collect())
    };
    Ok(DetectionSamples {
        h0: run(Hypothesis::Absent)?,
        h1: run(Hypothesis::Present)?,
        rho_empirical: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub pfa: f64,
    pub pd: f64,
    /// Decide "present" when the statistic is ≥ this value.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    /// Sorted by decreasing threshold, from (0, 0) to (1, 1).
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// Detection probability at false-alarm rate `pfa`, linear between points.
    pub fn pd_at(&self, pfa: f64) -> f64 {
        let idx = self.points.partition_point(|p| p.pfa <= pfa);
        let i = idx.saturating_sub(1);
        let a = self.points[i];
        match self.points.get(i + 1) {
            Some(b) if b.pfa > a.pfa => a.pd + (b.pd - a.pd) * (pfa - a.pfa) / (b.pfa - a.pfa),
            _ => a.pd,
        }
    }
}

/// Empirical ROC from threshold sweep over the pooled samples.
pub fn roc_curve(h0: &[f64], h1: &[f64]) -> Result<RocCurve> {
    if h0.is_empty() || h1.is_empty() {
        return Err(validation("roc", "both sample sets must be non-empty"));
    }
    if h0.iter().chain(h1).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite detection statistic".into()));
    }
    let desc = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    };
    let (s0, s1) = (desc(h0), desc(h1));
    let (n0, n1) = (s0.len() as f64, s1.len() as f64);
    let mut points = vec![RocPoint {
        pfa: 0.0,
        pd: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut i0, mut i1) = (0, 0);
    while i0 < s0.len() || i1 < s1.len() {
        let t = match (s0.get(i0), s1.get(i1)) {
            (Some(a), Some(b)) => a.max(*b),
            (Some(a), None) => *a,
            (None, Some(b)) => *b,
            (None, None) => unreachable!(),
        };
        while i0 < s0.len() && s0[i0] >= t {
            i0 += 1;
        }
        while i1 < s1.len() && s1[i1] >= t {
            i1 += 1;
        }
        points.push(RocPoint {
            pfa: i0 as f64 / n0,
            pd: i1 as f64 / n1,
            threshold: t,
        });
    }
    if let Some(last) = points.last_mut() {
        last.threshold = f64::NEG_INFINITY;
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].pfa - w[0].pfa) * 0.5 * (w[0].pd + w[1].pd))
        .sum();
    Ok(RocCurve { points, auc })
}

/// Largest shortfall of `a` below `b` over `pfas`, after subtracting a
/// `z`-sigma binomial band for `n` decisions per hypothesis. Non-positive
/// means `a` is on or above `b` everywhere within the band.
pub fn dominance_shortfall(a: &RocCurve, b: &RocCurve, pfas: &[f64], n: usize, z: f64) -> f64 {
    let n = n as f64;
    pfas.iter()
        .map(|&f| {
            let (pa, pb) = (a.pd_at(f), b.pd_at(f));
            let band = z * ((pa * (1.0 - pa) + pb * (1.0 - pb)) / n).sqrt() + 1.0 / n;
            pb - pa - band
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QiReport {
    pub rho_analytic: f64,
    pub rho_empirical: f64,
    pub auc_qi: f64,
    pub auc_ci: f64,
    pub roc_qi: RocCurve,
    pub roc_ci: RocCurve,
}

pub fn analyze(scenario: &QiScenario) -> Result<QiReport> {
    let qi = run_detection(scenario)?;
    let ci = ci_baseline(scenario)?;
    let roc_qi = roc_curve(&qi.h0, &qi.h1)?;
    let roc_ci = roc_curve(&ci.h0, &ci.h1)?;
    Ok(QiReport {
        rho_analytic: correlation_coefficient(&received_state(scenario, Hypothesis::Present)?)?,
        rho_empirical: qi.rho_empirical.unwrap_or(f64::NAN),
        auc_qi: roc_qi.auc,
        auc_ci: roc_ci.auc,
        roc_qi,
        roc_ci,
    })
}
