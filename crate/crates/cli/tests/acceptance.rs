//! Acceptance suite: one check per criterion, printed as a pass/fail table.
//! Runs without the libtest harness so the table is always shown.

use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use qradar_cli::{parse_config, presets, run};
use qradar_core::channel::thermal_loss;
use qradar_core::channel::{
    attenuation_channel, n_eff_closed, n_eff_general_step, round_trip, target_channel,
    ThermalProfile,
};
use qradar_core::criteria::{gaussian_discord, lambda_sph, report, two_eta, BipartiteBlocks};
use qradar_core::eom::{self, EomAxis, EomParams, ModePair, Threshold};
use qradar_core::gaussian::{random_physical_cov, GaussianChannel, GaussianState, PhaseSpaceGrid};
use qradar_core::jpa::{self, AmplifierParams, SWEEP_GAINS};
use qradar_core::langevin::LinearLangevinModel;
use qradar_core::oe::{self, OeParams, REFERENCE_MU_C};
use qradar_core::receiver::{
    analyze, dominance_shortfall, roc_curve, run_detection, Detector, QiScenario,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Duration);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn tmsv_blocks(r: f64) -> BipartiteBlocks {
    BipartiteBlocks::from_state(&GaussianState::two_mode_squeezed_vacuum(r), 0, 1).unwrap()
}

fn r_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

fn c1_lambda_sph() -> Check {
    let mut worst: f64 = 0.0;
    for r in r_grid() {
        let exact = (1.0 - (4.0 * r).cosh()) / 8.0;
        worst = worst.max((lambda_sph(&tmsv_blocks(r)) - exact).abs());
    }
    ensure(worst <= 1e-9, format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn c2_ppt() -> Check {
    let mut worst: f64 = 0.0;
    for r in r_grid() {
        let eta = two_eta(&tmsv_blocks(r)).map_err(|e| e.to_string())?;
        worst = worst.max((eta - (-2.0 * r).exp()).abs());
    }
    ensure(worst <= 1e-9, format!("max deviation {worst:e}"))?;
    let vac = report(&tmsv_blocks(0.0)).map_err(|e| e.to_string())?;
    ensure(
        vac.lambda_sph.abs() <= 1e-9
            && (vac.two_eta - 1.0).abs() <= 1e-9
            && vac.discord.abs() <= 1e-9,
        format!(
            "vacuum gives ({}, {}, {})",
            vac.lambda_sph, vac.two_eta, vac.discord
        ),
    )?;
    Ok(format!("max deviation {worst:.1e}; vacuum (0, 1, 0)"))
}

fn c3_agreement() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut entangled = 0;
    for i in 0..1000 {
        let v = random_physical_cov(2, 3.0, 1.2, &mut rng);
        let blocks =
            BipartiteBlocks::from_state(&GaussianState::from_cov(v).unwrap(), 0, 1).unwrap();
        let r = report(&blocks).map_err(|e| e.to_string())?;
        ensure(
            r.entangled_by_sph == r.entangled_by_ppt,
            format!("sample {i}: λ={} 2η={}", r.lambda_sph, r.two_eta),
        )?;
        if r.entangled_by_ppt {
            entangled += 1;
            ensure(
                r.discord > 0.0,
                format!("sample {i}: entangled with discord {}", r.discord),
            )?;
        }
    }
    for i in 0..1000 {
        let a = random_physical_cov(1, 3.0, 1.2, &mut rng);
        let b = random_physical_cov(1, 3.0, 1.2, &mut rng);
        let blocks = BipartiteBlocks::new(
            nalgebra::Matrix2::from_iterator(a.iter().copied()),
            nalgebra::Matrix2::from_iterator(b.iter().copied()),
            nalgebra::Matrix2::zeros(),
        )
        .map_err(|e| e.to_string())?;
        let d = gaussian_discord(&blocks)
            .map_err(|e| e.to_string())?
            .discord;
        ensure(
            d.abs() <= 1e-9,
            format!("product state {i} has discord {d:e}"),
        )?;
    }
    Ok(format!(
        "1000 states agree ({entangled} entangled); 1000 product states discord-free"
    ))
}

fn random_model(rng: &mut ChaCha8Rng) -> LinearLangevinModel {
    let mut a = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
    let max_re = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::MIN, f64::max);
    let shift = max_re + rng.random_range(0.1..0.6);
    for i in 0..6 {
        a[(i, i)] -= shift;
    }
    let b = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
    LinearLangevinModel::unlabeled(a, &b * b.transpose()).unwrap()
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn c4_lyapunov() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = random_model(&mut rng);
        let v = m.steady_state_cov().map_err(|e| e.to_string())?;
        let t = 60.0 / m.stability().max_real.abs();
        let vt = m
            .propagate_cov(&DMatrix::zeros(6, 6), t)
            .map_err(|e| e.to_string())?;
        worst = worst.max(inf_norm(&(vt - v)));
    }
    ensure(worst <= 1e-6, format!("max ‖ΔV‖∞ {worst:e}"))?;
    Ok(format!("max ‖ΔV‖∞ {worst:.1e} over 100 models"))
}

fn c5_eom() -> Check {
    let p = EomParams::reference();
    let grid: Vec<f64> = (0..50).map(|k| 2.0 * k as f64 / 49.0).collect();
    let points = eom::sweep(&p, EomAxis::Temperature, &grid).map_err(|e| e.to_string())?;
    let lambdas: Vec<f64> = points
        .iter()
        .map(|pt| {
            pt.report
                .as_ref()
                .map(|r| r.oc_mc.lambda_sph)
                .ok_or("unstable grid point")
        })
        .collect::<Result<_, _>>()?;
    ensure(
        lambdas.windows(2).all(|w| w[1] >= w[0]),
        "λ_SPH(OC–MC) not monotone in T",
    )?;
    let t =
        eom::separability_threshold(&p, ModePair::OcMc, 5.0, 1e-3).map_err(|e| e.to_string())?;
    let Threshold::At(t_star) = t else {
        return Err(format!("no crossing: {t:?}"));
    };
    ensure(
        lambdas[0] < 0.0 && *lambdas.last().unwrap() > 0.0,
        "grid does not bracket the crossing",
    )?;
    let decoupled = EomParams {
        g1: 0.0,
        g2: 0.0,
        ..p
    }
    .with_temperature(0.3);
    let r = eom::entanglement_report(&decoupled).map_err(|e| e.to_string())?;
    for pair in ModePair::ALL {
        let c = r.get(pair);
        ensure(
            !c.entangled_by_sph && c.discord == 0.0,
            format!("decoupled {} correlated: {c:?}", pair.label()),
        )?;
    }
    Ok(format!(
        "monotone on 50 points; T* = {t_star:.4} K; decoupled pairs separable"
    ))
}

fn reference_link() -> GaussianChannel {
    let leg = attenuation_channel(2e-6, 20.0, 0.0).unwrap();
    round_trip(&leg, &target_channel(18.2, 0.01, 0.0).unwrap(), &leg).unwrap()
}

fn c6_oe() -> Check {
    let kelvin = |t: Threshold| t.kelvin().ok_or(format!("no finite threshold: {t:?}"));
    let eom_t = kelvin(
        eom::separability_threshold(&EomParams::reference(), ModePair::OcMc, 5.0, 1e-3)
            .map_err(|e| e.to_string())?,
    )?;
    let base = OeParams::reference();
    let oe_t = kelvin(oe::direct_threshold(&base, 5.0, 1e-3).map_err(|e| e.to_string())?)?;
    ensure(oe_t > eom_t, format!("T*(OE) {oe_t} ≤ T*(EOM) {eom_t}"))?;
    let mut curve = Vec::new();
    for s in [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0] {
        let p = base.with_mu_c(s * REFERENCE_MU_C);
        curve.push(kelvin(
            oe::direct_threshold(&p, 5.0, 1e-3).map_err(|e| e.to_string())?,
        )?);
    }
    ensure(
        curve.windows(2).all(|w| w[1] > w[0]),
        format!("T*(μ_c) not strictly increasing: {curve:?}"),
    )?;
    let e2e = kelvin(
        oe::end_to_end_threshold(&base, &reference_link(), 5.0, 1e-3).map_err(|e| e.to_string())?,
    )?;
    ensure(
        e2e < oe_t,
        format!("end-to-end {e2e} not below direct {oe_t}"),
    )?;
    Ok(format!(
        "T*: OE {oe_t:.4} K > EOM {eom_t:.4} K; μ_c sweep {:.3}..{:.3} K; end-to-end {e2e:.4} K",
        curve[0],
        curve[curve.len() - 1]
    ))
}

fn c7_jpa() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let kappa = rng.random_range(0.1..10.0);
        let amp = AmplifierParams {
            delta0: rng.random_range(-1.0..1.0) * kappa,
            lambda1: Complex64::from_polar(
                rng.random_range(0.0..0.49) * kappa,
                rng.random_range(0.0..std::f64::consts::TAU),
            ),
            kappa,
        };
        for k in 0..=100 {
            let omega = (k as f64 / 50.0 - 1.0) * 3.0 * kappa;
            let s = jpa::scattering_matrix(&amp, omega).map_err(|e| e.to_string())?;
            worst = worst.max((s[(0, 0)].norm_sqr() - s[(0, 1)].norm_sqr() - 1.0).abs());
        }
    }
    ensure(worst <= 1e-8, format!("Bogoliubov deviation {worst:e}"))?;
    let quarter = jpa::scattering_matrix(&AmplifierParams::resonant(0.25, 1.0, 0.0), 0.0)
        .map_err(|e| e.to_string())?;
    let g = quarter[(0, 0)].norm();
    ensure(
        (g - 5.0 / 3.0).abs() <= 1e-10,
        format!("gain at κ/4 is {g}"),
    )?;
    let gains: Vec<f64> = (1..=8)
        .map(|k| {
            jpa::power_gain(
                &AmplifierParams::resonant(0.5 * (1.0 - 10f64.powi(-k)), 1.0, 0.0),
                0.0,
            )
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(
        gains.windows(2).all(|w| w[1] > w[0]) && gains[7] > 1e15,
        format!("gain near threshold {gains:?}"),
    )?;
    Ok(format!(
        "Bogoliubov deviation {worst:.1e}; |S₁₁|(κ/4) = {g:.12}; gain → {:.1e}",
        gains[7]
    ))
}

fn c8_wigner() -> Check {
    let grid = PhaseSpaceGrid::square(-40.0, 40.0, 0.04).map_err(|e| e.to_string())?;
    let gains = [0.0, SWEEP_GAINS[0], SWEEP_GAINS[1], SWEEP_GAINS[2]];
    let frames = jpa::wigner_sweep(&gains, &grid, 0.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for f in &frames {
        worst = worst.max((f.wigner.riemann_sum() - 1.0).abs());
    }
    ensure(worst <= 1e-3, format!("normalisation error {worst:e}"))?;
    let minors: Vec<f64> = frames[1..].iter().map(|f| f.minor_variance).collect();
    ensure(
        minors.windows(2).all(|w| w[1] < w[0]),
        format!("squeezed variances {minors:?}"),
    )?;
    Ok(format!(
        "normalisation error {worst:.1e}; squeezed variances {minors:.4?}"
    ))
}

fn c9_channel() -> Check {
    let profile = |n_in, n_out, mu_in, mu_out, l0, l| ThermalProfile {
        n_in,
        n_out,
        mu_in,
        mu_out,
        l0,
        l,
    };
    let limits = [
        (profile(2.5, 2.5, 0.3, 1.7, 0.4, 1.1), 2.5),
        (profile(0.2, 9.0, 1.0, 3.0, 2.0, 2.0), 0.2),
        (profile(0.2, 9.0, 1.0, 3.0, 0.0, 2.0), 9.0),
        (profile(0.2, 9.0, 1.0, 0.0, 0.5, 2.0), 0.2),
        (profile(0.2, 9.0, 0.0, 3.0, 0.5, 2.0), 9.0),
    ];
    for (p, n) in limits {
        let v = n_eff_closed(&p).map_err(|e| e.to_string())?;
        ensure(v == n, format!("limit {p:?} gives {v}, expected {n}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let l = rng.random_range(0.1..5.0);
        let p = profile(
            rng.random_range(0.0..5.0),
            rng.random_range(0.0..50.0),
            rng.random_range(0.01..3.0),
            rng.random_range(0.01..3.0),
            rng.random_range(0.0..l),
            l,
        );
        let closed = n_eff_closed(&p).map_err(|e| e.to_string())?;
        let general = n_eff_general_step(&p, 10).map_err(|e| e.to_string())?;
        worst = worst.max((closed - general).abs());
    }
    ensure(worst <= 1e-8, format!("general vs closed {worst:e}"))?;
    let mut comp: f64 = 0.0;
    for _ in 0..100 {
        let (kappa, n) = (rng.random_range(1e-3..2.0), rng.random_range(0.0..20.0));
        let (r1, r2) = (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
        let ab = attenuation_channel(kappa, r1, n)
            .unwrap()
            .then(&attenuation_channel(kappa, r2, n).unwrap())
            .unwrap();
        let whole = attenuation_channel(kappa, r1 + r2, n).unwrap();
        comp = comp
            .max((&ab.x - &whole.x).amax())
            .max((&ab.y - &whole.y).amax());
    }
    ensure(comp <= 1e-12, format!("composition error {comp:e}"))?;
    let eta = |range: f64, kdz: f64, n_env: f64| -> Result<f64, String> {
        let leg = attenuation_channel(0.05, range, n_env).map_err(|e| e.to_string())?;
        let link = round_trip(
            &leg,
            &target_channel(1.0, kdz, n_env).map_err(|e| e.to_string())?,
            &leg,
        )
        .map_err(|e| e.to_string())?;
        let s = GaussianState::two_mode_squeezed_vacuum(0.8)
            .apply_channel_to_mode(&link, 1)
            .map_err(|e| e.to_string())?;
        two_eta(&BipartiteBlocks::from_state(&s, 0, 1).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())
    };
    let monotone = |vals: Vec<f64>, what: &str| {
        ensure(
            vals.windows(2).all(|w| w[1] >= w[0]),
            format!("2η not monotone in {what}: {vals:?}"),
        )
    };
    let steps: Vec<f64> = (0..12).map(|k| k as f64 * 0.5).collect();
    monotone(
        steps
            .iter()
            .map(|&r| eta(r, 0.5, 0.2))
            .collect::<Result<_, _>>()?,
        "R",
    )?;
    monotone(
        steps
            .iter()
            .map(|&k| eta(2.0, 0.05 + k, 0.2))
            .collect::<Result<_, _>>()?,
        "κ_tΔz_t",
    )?;
    monotone(
        steps
            .iter()
            .map(|&n| eta(2.0, 0.5, n))
            .collect::<Result<_, _>>()?,
        "n_env",
    )?;
    Ok(format!(
        "limits exact; general vs closed {worst:.1e}; composition {comp:.1e}; 2η monotone"
    ))
}

fn c10_receiver() -> Check {
    let r: f64 = 0.4;
    let direct = QiScenario {
        signal_channel: GaussianChannel::identity(1),
        background_channel: GaussianChannel::identity(1),
        ..QiScenario::thermal_target(r, 0.5, 1.0, 100, 1000, 10).map_err(|e| e.to_string())?
    };
    let rho = run_detection(&direct)
        .map_err(|e| e.to_string())?
        .rho_empirical
        .unwrap();
    let exact = (2.0 * r).tanh();
    let se = (1.0 - exact * exact) / (1e5f64).sqrt();
    ensure(
        (rho - exact).abs() <= 3.0 * se,
        format!("ρ̂ {rho} vs {exact} (σ {se:e})"),
    )?;

    let mut nulls = Vec::new();
    let no_target = QiScenario {
        signal_channel: thermal_loss(0.0, 10.0).unwrap(),
        ..QiScenario::thermal_target(0.1f64.asinh(), 0.5, 10.0, 50, 10_000, 101)
            .map_err(|e| e.to_string())?
    };
    let no_squeezing =
        QiScenario::thermal_target(0.0, 0.5, 1.0, 50, 10_000, 102).map_err(|e| e.to_string())?;
    let energy = QiScenario {
        detector: Detector::Energy,
        ..no_target.clone()
    };
    for s in [&no_target, &no_squeezing, &energy] {
        let d = run_detection(s).map_err(|e| e.to_string())?;
        let auc = roc_curve(&d.h0, &d.h1).map_err(|e| e.to_string())?.auc;
        ensure((auc - 0.5).abs() <= 0.01, format!("null AUC {auc}"))?;
        nulls.push(auc);
    }

    let preset = QiScenario::low_signal_high_noise();
    let rep = analyze(&preset).map_err(|e| e.to_string())?;
    let pfas: Vec<f64> = (1..100).map(|k| k as f64 / 100.0).collect();
    let shortfall = dominance_shortfall(&rep.roc_qi, &rep.roc_ci, &pfas, preset.n_decisions, 3.0);
    ensure(
        shortfall <= 0.0,
        format!("QI below CI by {shortfall} beyond the band"),
    )?;
    ensure(
        rep.auc_qi >= rep.auc_ci - 0.01,
        format!("AUC QI {} vs CI {}", rep.auc_qi, rep.auc_ci),
    )?;
    Ok(format!(
        "ρ̂ {rho:.5} vs {exact:.5}; null AUCs {nulls:.4?}; AUC QI {:.4} / CI {:.4}, worst shortfall {shortfall:.4}",
        rep.auc_qi, rep.auc_ci
    ))
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn c11_determinism() -> Check {
    for (name, text) in presets::SCENARIOS {
        let mut runs = Vec::new();
        for threads in [1, 8, 8] {
            let mut config = parse_config(text).map_err(|e| format!("{name}: {e}"))?;
            config.parallelism = threads;
            let dir = tempfile::tempdir().unwrap();
            run(&config, text, dir.path()).map_err(|e| format!("{name}: {e}"))?;
            runs.push(read_all(dir.path()));
        }
        ensure(
            runs[0] == runs[1] && runs[1] == runs[2],
            format!("{name}: outputs differ between runs"),
        )?;
    }
    Ok(format!(
        "{} presets byte-identical at parallelism 1, 8, 8",
        presets::SCENARIOS.len()
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("λ_SPH closed form", c1_lambda_sph, Duration::from_secs(1)),
        ("PPT oracle", c2_ppt, Duration::from_secs(1)),
        ("criterion agreement", c3_agreement, Duration::from_secs(30)),
        (
            "Lyapunov/ODE cross-check",
            c4_lyapunov,
            Duration::from_secs(60),
        ),
        ("EOM temperature behaviour", c5_eom, Duration::MAX),
        ("OE thresholds", c6_oe, Duration::MAX),
        ("JPA scattering", c7_jpa, Duration::MAX),
        ("Wigner sweep", c8_wigner, Duration::MAX),
        ("channels", c9_channel, Duration::MAX),
        ("receiver", c10_receiver, Duration::from_secs(300)),
        ("CLI determinism", c11_determinism, Duration::MAX),
    ];
    let mut failures = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > *budget => Err(format!(
                "took {:.1} s, budget {:.0} s",
                elapsed.as_secs_f64(),
                budget.as_secs_f64()
            )),
            other => other,
        };
        match outcome {
            Ok(detail) => println!(
                "criterion {:>2} PASS  {name} ({:.2} s): {detail}",
                i + 1,
                elapsed.as_secs_f64()
            ),
            Err(detail) => {
                failures += 1;
                println!(
                    "criterion {:>2} FAIL  {name} ({:.2} s): {detail}",
                    i + 1,
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
