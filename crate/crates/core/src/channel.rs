//! Propagation losses as single-mode Gaussian channels: lossy lines with a
//! temperature profile, atmospheric attenuation, target scattering and
//! receiver amplifiers.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
pub use crate::gaussian::GaussianChannel;

/// Atmospheric attenuation coefficient of the reference link (1/m).
pub const FIG10_KAPPA_ATM: f64 = 2e-6;
/// Transmitter–target distance of the reference link (m).
pub const FIG10_DISTANCE: f64 = 20.0;
/// Target attenuation coefficient of the reference link (1/m).
pub const FIG10_KAPPA_T: f64 = 18.2;

/// Two-zone line: cold section `[0, L₀)` and warm section `[L₀, L]`, with the
/// signal leaving at `x = L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalProfile {
    pub n_in: f64,
    pub n_out: f64,
    pub mu_in: f64,
    pub mu_out: f64,
    pub l0: f64,
    pub l: f64,
}

impl ThermalProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_in >= 0.0
            && self.n_out >= 0.0
            && self.mu_in >= 0.0
            && self.mu_out >= 0.0
            && self.l > 0.0
            && (0.0..=self.l).contains(&self.l0);
        if !ok {
            return Err(validation(
                "thermal_profile",
                format!("need n ≥ 0, μ ≥ 0, L > 0 and 0 ≤ L₀ ≤ L; got {self:?}"),
            ));
        }
        Ok(())
    }

    pub fn occupation_at(&self, x: f64) -> f64 {
        if x < self.l0 {
            self.n_in
        } else {
            self.n_out
        }
    }

    pub fn absorption_at(&self, x: f64) -> f64 {
        if x < self.l0 {
            self.mu_in
        } else {
            self.mu_out
        }
    }
}

/// Effective thermal occupation injected by a two-zone line.
pub fn n_eff_closed(profile: &ThermalProfile) -> Result<f64> {
    profile.validate()?;
    let den = -(-profile.mu_in * profile.l0 - profile.mu_out * (profile.l - profile.l0)).exp_m1();
    if den <= 1e-300 {
        return Err(Error::Domain(
            "line has zero total absorption; n_eff is undefined".into(),
        ));
    }
    if profile.n_in == profile.n_out || profile.l0 == profile.l || profile.mu_out == 0.0 {
        return Ok(profile.n_in);
    }
    if profile.l0 == 0.0 || profile.mu_in == 0.0 {
        return Ok(profile.n_out);
    }
    let warm = (-profile.mu_out * (profile.l - profile.l0)).exp();
    let w_in = warm * -(-profile.mu_in * profile.l0).exp_m1();
    let w_out = -(-profile.mu_out * (profile.l - profile.l0)).exp_m1();
    Ok((profile.n_in * w_in + profile.n_out * w_out) / den)
}

const QUAD_TOL: f64 = 1e-13;
const QUAD_MAX_DEPTH: usize = 40;

/// Adaptive composite Gauss–Legendre on `[a, b]`, splitting at `breaks`.
fn integrate<F: Fn(f64) -> f64>(
    rule: &GaussLegendre,
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
) -> Result<f64> {
    let mut edges = vec![a];
    edges.extend(breaks.iter().copied().filter(|x| *x > a && *x < b));
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let coarse = rule.integrate(w[0], w[1], f);
        total += refine(rule, f, w[0], w[1], coarse, 0)?;
    }
    Ok(total)
}

fn refine<F: Fn(f64) -> f64>(
    rule: &GaussLegendre,
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let left = rule.integrate(a, m, f);
    let right = rule.integrate(m, b, f);
    let fine = left + right;
    if (fine - whole).abs() <= QUAD_TOL * fine.abs().max(1.0) {
        return Ok(fine);
    }
    if depth >= QUAD_MAX_DEPTH {
        return Err(Error::NoConvergence {
            iterations: depth,
            residual: (fine - whole).abs(),
        });
    }
    Ok(refine(rule, f, a, m, left, depth + 1)? + refine(rule, f, m, b, right, depth + 1)?)
}

/// Effective occupation for arbitrary absorption and occupation profiles:
/// `∫₀ᴸ μ(x) n(x) e^{−∫ₓᴸ μ} dx / (1 − e^{−∫₀ᴸ μ})`, each emitter attenuated
/// over the remaining path to the output.
///
/// `breaks` lists known discontinuities of either profile so panels never
/// straddle them.
pub fn n_eff_general<M, N>(
    mu: M,
    n: N,
    length: f64,
    quadrature_points: usize,
    breaks: &[f64],
) -> Result<f64>
where
    M: Fn(f64) -> f64,
    N: Fn(f64) -> f64,
{
    if !(length > 0.0) {
        return Err(Error::Domain(format!(
            "line length must be positive, got {length}"
        )));
    }
    let points = NonZeroUsize::new(quadrature_points)
        .ok_or_else(|| Error::Domain("need at least one quadrature point".into()))?;
    let rule = GaussLegendre::new(points);
    let total_depth = integrate(&rule, &mu, 0.0, length, breaks)?;
    let den = -(-total_depth).exp_m1();
    if den <= 1e-300 {
        return Err(Error::Domain(
            "line has zero total absorption; n_eff is undefined".into(),
        ));
    }
    let failure = std::cell::RefCell::new(None);
    let emitted = |x: f64| {
        let remaining = integrate(&rule, &mu, x, length, breaks).unwrap_or_else(|e| {
            failure.borrow_mut().get_or_insert(e);
            0.0
        });
        mu(x) * n(x) * (-remaining).exp()
    };
    let num = integrate(&rule, &emitted, 0.0, length, breaks)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(num / den)
}

/// Step profile evaluated through [`n_eff_general`].
pub fn n_eff_general_step(profile: &ThermalProfile, quadrature_points: usize) -> Result<f64> {
    profile.validate()?;
    n_eff_general(
        |x| profile.absorption_at(x),
        |x| profile.occupation_at(x),
        profile.l,
        quadrature_points,
        &[profile.l0],
    )
}

fn single_mode(x: f64, y: f64, description: String) -> Result<GaussianChannel> {
    GaussianChannel::new(
        DMatrix::identity(2, 2) * x,
        DMatrix::identity(2, 2) * y,
        description,
    )
}

/// Beam splitter of power transmissivity `tau` mixing in a thermal mode of
/// occupation `n_env`; `tau = 0` replaces the input by pure background.
pub fn thermal_loss(tau: f64, n_env: f64) -> Result<GaussianChannel> {
    if !(0.0..=1.0).contains(&tau) || !(n_env >= 0.0) {
        return Err(Error::Domain(format!(
            "need 0 ≤ τ ≤ 1 and n ≥ 0; got τ = {tau}, n = {n_env}"
        )));
    }
    single_mode(
        tau.sqrt(),
        (1.0 - tau) * (n_env + 0.5),
        format!("thermal loss τ={tau} n={n_env}"),
    )
}

/// Beam-splitter model of `range` metres of air with amplitude attenuation
/// `kappa_atm` per metre: power transmissivity `e^{−2κR}`.
pub fn attenuation_channel(kappa_atm: f64, range: f64, n_env: f64) -> Result<GaussianChannel> {
    if !(kappa_atm >= 0.0) || !(range >= 0.0) || !(n_env >= 0.0) {
        return Err(Error::Domain(format!(
            "need κ ≥ 0, R ≥ 0, n ≥ 0; got κ = {kappa_atm}, R = {range}, n = {n_env}"
        )));
    }
    let tau = (-2.0 * kappa_atm * range).exp();
    single_mode(
        tau.sqrt(),
        -(-2.0 * kappa_atm * range).exp_m1() * (n_env + 0.5),
        format!("attenuation κ={kappa_atm:e}/m R={range}m n={n_env}"),
    )
}

/// Scattering off a target of thickness `dz_t` and attenuation `kappa_t`:
/// amplitude reflectivity `e^{−κ_t Δz_t}` plus thermal emission.
pub fn target_channel(kappa_t: f64, dz_t: f64, n_t: f64) -> Result<GaussianChannel> {
    if !(kappa_t >= 0.0) || !(dz_t > 0.0) || !(n_t >= 0.0) {
        return Err(Error::Domain(format!(
            "need κ_t ≥ 0, Δz_t > 0, n_t ≥ 0; got κ_t = {kappa_t}, Δz_t = {dz_t}, n_t = {n_t}"
        )));
    }
    let r = (-kappa_t * dz_t).exp();
    single_mode(
        r,
        -(-2.0 * kappa_t * dz_t).exp_m1() * (n_t + 0.5),
        format!("target κ_t={kappa_t}/m Δz={dz_t}m n={n_t}"),
    )
}

/// Phase-insensitive amplifier with power gain `gain_db` and `added_noise`
/// extra photons referred to the input.
pub fn amplifier_channel(gain_db: f64, added_noise: f64) -> Result<GaussianChannel> {
    if !(gain_db >= 0.0) {
        return Err(Error::Domain(format!(
            "gain {gain_db} dB is below unity; use attenuation_channel for loss"
        )));
    }
    if !(added_noise >= 0.0) {
        return Err(Error::Domain(format!(
            "added noise must be ≥ 0, got {added_noise}"
        )));
    }
    let g = 10f64.powf(gain_db / 10.0);
    single_mode(
        g.sqrt(),
        (g - 1.0) * (added_noise + 0.5),
        format!("amplifier {gain_db} dB n_add={added_noise}"),
    )
}

/// Out-and-back path: `out`, then `target`, then `back`.
pub fn round_trip(
    out: &GaussianChannel,
    target: &GaussianChannel,
    back: &GaussianChannel,
) -> Result<GaussianChannel> {
    for c in [out, target, back] {
        if c.n_modes() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                found: c.n_modes(),
            });
        }
    }
    let mut composite = out.then(target)?.then(back)?;
    composite.description = format!(
        "{} → {} → {}",
        out.description, target.description, back.description
    );
    Ok(composite)
}

/// Named channel presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelPreset {
    /// 20 m of air at κ_atm = 2×10⁻⁶ /m.
    Fig10Atmosphere,
    /// Target with κ_t = 18.2 /m.
    Fig10Target,
    /// Quantum-limited amplifier.
    QuantumLimitedAmp,
}

impl ChannelPreset {
    pub const ALL: [ChannelPreset; 3] = [
        ChannelPreset::Fig10Atmosphere,
        ChannelPreset::Fig10Target,
        ChannelPreset::QuantumLimitedAmp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChannelPreset::Fig10Atmosphere => "fig10_atmosphere",
            ChannelPreset::Fig10Target => "fig10_target",
            ChannelPreset::QuantumLimitedAmp => "quantum_limited_amp",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Builds the channel. `param` is the environment occupation for the
    /// atmosphere, the target thickness in metres for the target (its
    /// occupation is `extra`), and the gain in dB for the amplifier.
    pub fn build(self, param: f64, extra: f64) -> Result<GaussianChannel> {
        match self {
            ChannelPreset::Fig10Atmosphere => {
                attenuation_channel(FIG10_KAPPA_ATM, FIG10_DISTANCE, param)
            }
            ChannelPreset::Fig10Target => target_channel(FIG10_KAPPA_T, param, extra),
            ChannelPreset::QuantumLimitedAmp => amplifier_channel(param, 0.0),
        }
    }
}

/// Target thickness used by the reference link, in metres.
pub const FIG10_TARGET_DEPTH: f64 = 0.01;

/// Reference link: 20 m out, target, 20 m back.
pub fn fig10_round_trip(n_env: f64, dz_t: f64, n_t: f64) -> Result<GaussianChannel> {
    let leg = attenuation_channel(FIG10_KAPPA_ATM, FIG10_DISTANCE, n_env)?;
    round_trip(&leg, &target_channel(FIG10_KAPPA_T, dz_t, n_t)?, &leg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{two_eta, BipartiteBlocks};
    use crate::gaussian::GaussianState;

    fn step(n_in: f64, n_out: f64, mu_in: f64, mu_out: f64, l0: f64, l: f64) -> ThermalProfile {
        ThermalProfile {
            n_in,
            n_out,
            mu_in,
            mu_out,
            l0,
            l,
        }
    }

    #[test]
    fn closed_form_limits() {
        let n = 3.7;
        for (mu_in, mu_out, l0) in [(0.1, 2.0, 0.3), (1.0, 1.0, 0.0), (5.0, 0.01, 0.9)] {
            let v = n_eff_closed(&step(n, n, mu_in, mu_out, l0, 1.0)).unwrap();
            assert!((v - n).abs() < 1e-14);
        }
        assert_eq!(
            n_eff_closed(&step(0.2, 9.0, 1.0, 3.0, 2.0, 2.0)).unwrap(),
            0.2
        );
        let ln2 = 2f64.ln();
        let v = n_eff_closed(&step(0.0, 1.0, ln2, ln2, 1.0, 2.0)).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            n_eff_closed(&step(0.0, 1.0, 0.0, 0.0, 1.0, 2.0)),
            Err(Error::Domain(_))
        ));
        assert!(n_eff_closed(&step(0.0, 1.0, 1.0, 1.0, 3.0, 2.0)).is_err());
    }

    #[test]
    fn general_matches_closed_form() {
        for p in [
            step(0.0, 1.0, 2f64.ln(), 2f64.ln(), 1.0, 2.0),
            step(0.01, 600.0, 0.05, 3.0, 7.0, 10.0),
            step(2.0, 0.5, 4.0, 0.2, 0.25, 1.0),
        ] {
            let closed = n_eff_closed(&p).unwrap();
            let general = n_eff_general_step(&p, 8).unwrap();
            assert!((closed - general).abs() <= 1e-8, "{closed} vs {general}");
        }
    }

    #[test]
    fn general_constant_and_ramp() {
        let v = n_eff_general(|_| 0.7, |_| 4.2, 3.0, 6, &[]).unwrap();
        assert!((v - 4.2).abs() < 1e-12);
        let v = n_eff_general(|_| 0.5, |x| 1.0 + x, 2.0, 6, &[]).unwrap();
        assert!(v > 1.0 && v < 3.0);
        assert!(n_eff_general(|_| 1.0, |_| 1.0, 0.0, 6, &[]).is_err());
        assert!(n_eff_general(|_| 1.0, |_| 1.0, 1.0, 0, &[]).is_err());
    }

    #[test]
    fn attenuation_examples() {
        assert_eq!(
            attenuation_channel(1.0, 0.0, 5.0).unwrap().x,
            DMatrix::identity(2, 2)
        );
        let c = attenuation_channel(FIG10_KAPPA_ATM, FIG10_DISTANCE, 0.0).unwrap();
        let tau = c.x[(0, 0)].powi(2);
        assert!((tau - (-8e-5f64).exp()).abs() < 1e-15);
        assert!((tau - 0.99992).abs() < 1e-8);
        let ab = attenuation_channel(0.3, 1.5, 2.0)
            .unwrap()
            .then(&attenuation_channel(0.3, 2.5, 2.0).unwrap())
            .unwrap();
        let whole = attenuation_channel(0.3, 4.0, 2.0).unwrap();
        assert!((&ab.x - &whole.x).amax() <= 1e-12 && (&ab.y - &whole.y).amax() <= 1e-12);
    }

    #[test]
    fn target_and_amplifier_examples() {
        let mirror = target_channel(0.0, 0.01, 3.0).unwrap();
        assert_eq!(
            (mirror.x.clone(), mirror.y.amax()),
            (DMatrix::identity(2, 2), 0.0)
        );
        assert!(target_channel(1.0, 0.0, 0.0).is_err());

        assert_eq!(amplifier_channel(0.0, 0.0).unwrap().y.amax(), 0.0);
        let amp = amplifier_channel(10.0 * 4f64.log10(), 0.0).unwrap();
        let out = GaussianState::vacuum(1).apply_channel(&amp).unwrap();
        assert!((out.cov()[(0, 0)] - 3.5).abs() < 1e-12);
        assert!(amplifier_channel(-1.0, 0.0).is_err());

        let loss = attenuation_channel(0.2, 1.0, 1.0).unwrap();
        let a = loss.then(&amp).unwrap();
        let b = amp.then(&loss).unwrap();
        assert!((&a.y - &b.y).amax() > 1e-3);
    }

    #[test]
    fn round_trip_composition() {
        let id = GaussianChannel::identity(1);
        let rt = round_trip(&id, &id, &id).unwrap();
        assert_eq!(
            (rt.x, rt.y),
            (DMatrix::identity(2, 2), DMatrix::zeros(2, 2))
        );
        let dz = 0.01;
        let rt = fig10_round_trip(0.0, dz, 0.0).unwrap();
        let r = (-FIG10_KAPPA_T * dz).exp();
        let expected = r * r * (-2.0 * 2.0 * FIG10_KAPPA_ATM * FIG10_DISTANCE).exp();
        assert!((rt.x[(0, 0)].powi(2) - expected).abs() < 1e-14);
        assert!(round_trip(&GaussianChannel::identity(2), &id, &id).is_err());
    }

    #[test]
    fn presets_are_completely_positive() {
        for p in ChannelPreset::ALL {
            let c = p.build(1.0, 0.5).unwrap();
            c.check_complete_positivity().unwrap();
            GaussianState::vacuum(1).apply_channel(&c).unwrap();
            assert_eq!(ChannelPreset::from_name(p.name()), Some(p));
        }
    }

    fn eta_after(r: f64, channel: &GaussianChannel) -> f64 {
        let s = GaussianState::two_mode_squeezed_vacuum(r)
            .apply_channel_to_mode(channel, 0)
            .unwrap();
        two_eta(&BipartiteBlocks::from_state(&s, 0, 1).unwrap()).unwrap()
    }

    #[test]
    fn round_trip_degrades_entanglement_monotonically() {
        let r = 0.6;
        let mut prev = 0.0;
        for range in [0.0, 1e3, 1e4, 5e4, 2e5] {
            let leg = attenuation_channel(FIG10_KAPPA_ATM, range, 0.5).unwrap();
            let e = eta_after(
                r,
                &round_trip(&leg, &target_channel(1.0, 0.01, 0.1).unwrap(), &leg).unwrap(),
            );
            assert!(e >= prev);
            prev = e;
        }
        let mut prev = 0.0;
        for n in [0.0, 0.1, 1.0, 10.0] {
            let e = eta_after(r, &fig10_round_trip(n, 0.01, 0.0).unwrap());
            assert!(e >= prev);
            prev = e;
        }
        let flooded = eta_after(r, &target_channel(1.0, 0.1, 1e6).unwrap());
        assert!(flooded >= 1.0);
    }
}
