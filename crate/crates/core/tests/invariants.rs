use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use proptest::prelude::*;
use qradar_core::channel::{
    amplifier_channel, attenuation_channel, n_eff_closed, thermal_loss, ThermalProfile,
};
use qradar_core::criteria::{report, standard_form, BipartiteBlocks};
use qradar_core::gaussian::{
    random_physical_cov, random_symplectic, symplectic_spectrum, GaussianState, SymplecticForm,
};
use qradar_core::jpa::{output_single_mode, scattering_matrix, AmplifierParams};
use qradar_core::langevin::{diffusion_from_baths, Bath};
use qradar_core::receiver::roc_curve;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn blocks_of(v: &DMatrix<f64>) -> BipartiteBlocks {
    BipartiteBlocks::from_state(&GaussianState::from_cov(v.clone()).unwrap(), 0, 1).unwrap()
}

fn local(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(4, 4);
    s.view_mut((0, 0), (2, 2)).copy_from(s1);
    s.view_mut((2, 2), (2, 2)).copy_from(s2);
    s
}

fn tmsv_symplectic(r: f64) -> DMatrix<f64> {
    let (c, s) = (r.cosh(), r.sinh());
    DMatrix::from_row_slice(
        4,
        4,
        &[
            c, 0.0, s, 0.0, 0.0, c, 0.0, -s, s, 0.0, c, 0.0, 0.0, -s, 0.0, c,
        ],
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symplectic_matrices_preserve_the_form(seed in any::<u64>(), n in 1usize..4) {
        let s = random_symplectic(n, 1.0, &mut rng(seed));
        let omega = SymplecticForm::new(n).matrix();
        prop_assert!((&s * &omega * s.transpose() - omega).amax() < 1e-10);
    }

    #[test]
    fn spectrum_is_symplectic_invariant(seed in any::<u64>(), n in 1usize..4) {
        let mut r = rng(seed);
        let v = random_physical_cov(n, 4.0, 1.0, &mut r);
        let s = random_symplectic(n, 0.8, &mut r);
        let mut before = symplectic_spectrum(&v);
        let mut after = symplectic_spectrum(&(&s * &v * s.transpose()));
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        for (a, b) in before.iter().zip(&after) {
            prop_assert!((a - b).abs() <= 1e-8 * a.max(1.0), "{a} vs {b}");
            prop_assert!(*a >= 0.5 - 1e-9);
        }
    }

    #[test]
    fn criteria_agree_and_ignore_local_operations(seed in any::<u64>()) {
        let mut r = rng(seed);
        let v = random_physical_cov(2, 3.0, 1.0, &mut r);
        // Heterodyne on the second mode commutes only with passive operations there.
        let s = local(&random_symplectic(1, 0.7, &mut r), &random_symplectic(1, 0.0, &mut r));
        let before = report(&blocks_of(&v)).unwrap();
        let after = report(&blocks_of(&(&s * &v * s.transpose()))).unwrap();
        prop_assert_eq!(before.entangled_by_sph, before.entangled_by_ppt);
        prop_assert!((before.two_eta - after.two_eta).abs() <= 1e-8 * before.two_eta.max(1.0));
        prop_assert!((before.lambda_sph - after.lambda_sph).abs() <= 1e-8 * before.lambda_sph.abs().max(1.0));
        prop_assert!((before.discord - after.discord).abs() <= 1e-6);
        prop_assert!(before.discord >= -1e-9 && before.mutual_info >= before.classical_corr - 1e-9);
    }

    #[test]
    fn standard_form_relation(seed in any::<u64>(), r_sq in 0.0f64..1.5, n1 in 0.0f64..3.0, n2 in 0.0f64..3.0) {
        let mut r = rng(seed);
        let tmsv = GaussianState::two_mode_squeezed_vacuum(r_sq).cov().clone();
        let thermal = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![n1 + 0.5, n1 + 0.5, n2 + 0.5, n2 + 0.5]));
        let squeeze = tmsv_symplectic(r_sq);
        let rot = local(&random_symplectic(1, 0.0, &mut r), &random_symplectic(1, 0.0, &mut r));
        let v = &rot * &squeeze * thermal * squeeze.transpose() * rot.transpose();
        prop_assert!((&squeeze * squeeze.transpose() * 0.5 - tmsv).amax() < 1e-9 * r_sq.cosh().powi(2));
        let sf = standard_form(&blocks_of(&v)).unwrap();
        if sf.b > 1.0 {
            prop_assert!((sf.tau * (sf.b * sf.b - 1.0) - sf.d * sf.d).abs() <= 1e-9 * sf.d.powi(2).max(1.0));
            prop_assert!(sf.tau >= 0.0);
        }
        prop_assert!(sf.a >= 0.5 - 1e-9 && sf.b >= 0.5 - 1e-9);
        let (c2, s2) = (r_sq.cosh().powi(2), r_sq.sinh().powi(2));
        let a = (n1 + 0.5) * c2 + (n2 + 0.5) * s2;
        let b = (n1 + 0.5) * s2 + (n2 + 0.5) * c2;
        let d = (n1 + n2 + 1.0) * r_sq.cosh() * r_sq.sinh();
        prop_assert!((sf.a - a).abs() <= 1e-9 * a && (sf.b - b).abs() <= 1e-9 * b);
        prop_assert!((sf.d - d).abs() <= 1e-9 * a.max(1.0), "{} vs {d}", sf.d);
    }

    #[test]
    fn auc_ignores_monotone_transforms(
        h0 in prop::collection::vec(-5.0f64..5.0, 1..60),
        h1 in prop::collection::vec(-5.0f64..5.0, 1..60),
    ) {
        let base = roc_curve(&h0, &h1).unwrap();
        let f = |v: &[f64]| v.iter().map(|x| (0.7 * x).exp() + x.powi(3)).collect::<Vec<_>>();
        let mapped = roc_curve(&f(&h0), &f(&h1)).unwrap();
        prop_assert!((base.auc - mapped.auc).abs() < 1e-12);
        let first = base.points.first().unwrap();
        let last = base.points.last().unwrap();
        prop_assert_eq!((first.pfa, first.pd), (0.0, 0.0));
        prop_assert_eq!((last.pfa, last.pd), (1.0, 1.0));
        for w in base.points.windows(2) {
            prop_assert!(w[1].pfa >= w[0].pfa && w[1].pd >= w[0].pd);
        }
    }

    #[test]
    fn bogoliubov_identity(
        kappa in 0.01f64..100.0,
        detuning in -2.0f64..2.0,
        ratio in 0.0f64..0.995,
        phase in 0.0f64..std::f64::consts::TAU,
        omega in -5.0f64..5.0,
    ) {
        let amp = AmplifierParams {
            delta0: detuning * kappa,
            lambda1: Complex64::from_polar(ratio * 0.5 * kappa, phase),
            kappa,
        };
        let s = scattering_matrix(&amp, omega * kappa).unwrap();
        let gain = s[(0, 0)].norm_sqr();
        prop_assert!((gain - s[(0, 1)].norm_sqr() - 1.0).abs() <= 1e-9 * gain.max(1.0));
    }

    #[test]
    fn pump_phase_rotates_the_output(g in 0.0f64..0.45, phase in 0.0f64..std::f64::consts::TAU, n_in in 0.0f64..3.0) {
        let base = output_single_mode(&AmplifierParams::resonant(g, 1.0, 0.0), n_in).unwrap();
        let turned = output_single_mode(&AmplifierParams::resonant(g, 1.0, phase), n_in).unwrap();
        let (c, s) = ((0.5 * phase).cos(), (0.5 * phase).sin());
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let expected = &rot * base.cov() * rot.transpose();
        prop_assert!((turned.cov() - &expected).amax() <= 1e-9 * expected.amax());
        prop_assert!((turned.cov().determinant() - (n_in + 0.5).powi(2)).abs() <= 1e-9 * (n_in + 0.5).powi(2) * expected.amax());
    }

    #[test]
    fn attenuation_composes_additively(kappa in 1e-4f64..3.0, r1 in 0.0f64..4.0, r2 in 0.0f64..4.0, n in 0.0f64..30.0) {
        let ab = attenuation_channel(kappa, r1, n).unwrap().then(&attenuation_channel(kappa, r2, n).unwrap()).unwrap();
        let whole = attenuation_channel(kappa, r1 + r2, n).unwrap();
        prop_assert!((&ab.x - &whole.x).amax() <= 1e-12);
        prop_assert!((&ab.y - &whole.y).amax() <= 1e-12 * whole.y.amax().max(1.0));
    }

    #[test]
    fn channels_are_completely_positive(tau in 0.0f64..=1.0, n in 0.0f64..20.0, gain_db in 0.0f64..30.0, extra in 0.0f64..5.0) {
        prop_assert!(thermal_loss(tau, n).unwrap().check_complete_positivity().is_ok());
        prop_assert!(amplifier_channel(gain_db, extra).unwrap().check_complete_positivity().is_ok());
    }

    #[test]
    fn effective_occupation_is_a_weighted_mean(
        n_in in 0.0f64..10.0, n_out in 0.0f64..100.0,
        mu_in in 0.01f64..3.0, mu_out in 0.01f64..3.0,
        frac in 0.0f64..=1.0, l in 0.1f64..5.0,
    ) {
        let n = n_eff_closed(&ThermalProfile { n_in, n_out, mu_in, mu_out, l0: frac * l, l }).unwrap();
        prop_assert!(n >= n_in.min(n_out) * (1.0 - 1e-12) && n <= n_in.max(n_out) * (1.0 + 1e-12));
    }

    #[test]
    fn diffusion_is_symmetric_psd(rates in prop::collection::vec((0.0f64..10.0, 0.0f64..2.0, any::<bool>()), 1..5)) {
        let omega = 2.0 * std::f64::consts::PI * 5e9;
        let baths: Vec<Bath> = rates
            .iter()
            .map(|&(rate, t, mech)| if mech { Bath::mechanical(omega, rate, t) } else { Bath::cavity(omega, rate, t) })
            .collect();
        let d = diffusion_from_baths(&baths).unwrap();
        prop_assert!((&d - d.transpose()).amax() <= 1e-10 * d.amax().max(1.0));
        let min = d.symmetric_eigenvalues().min();
        prop_assert!(min >= -1e-10 * d.amax().max(1.0));
    }
}

#[test]
fn product_blocks_have_no_correlations() {
    let mut r = rng(1);
    for _ in 0..50 {
        let a = random_physical_cov(1, 3.0, 1.0, &mut r);
        let b = random_physical_cov(1, 3.0, 1.0, &mut r);
        let blocks = BipartiteBlocks::new(
            Matrix2::from_iterator(a.iter().copied()),
            Matrix2::from_iterator(b.iter().copied()),
            Matrix2::zeros(),
        )
        .unwrap();
        let rep = report(&blocks).unwrap();
        assert!(
            !rep.entangled_by_ppt && rep.discord.abs() <= 1e-9 && rep.mutual_info.abs() <= 1e-9
        );
    }
}
