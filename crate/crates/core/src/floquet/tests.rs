use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::*;
use crate::control::{design_gains, GainDesign, Gating};
use crate::linalg::spectral_distance;
use crate::models::{hopf_linearization, hopf_orbit};
use crate::ode::{monodromy_uncontrolled, IntegratorOptions, Linearization};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn targets() -> Vec<Complex64> {
    vec![c(0.0, 0.5), c(0.0, -0.5)]
}

/// Hopf p = −0.25 with gains assigned to ±i/2, ε = 0.04, δ = T/500.
fn hopf_design() -> (Linearization, GainDesign) {
    let lin = hopf_linearization(-0.25).unwrap();
    let p0 = monodromy_uncontrolled(&lin, &IntegratorOptions::default()).unwrap();
    let k = design_gains(&p0, &lin.b(0.0), &targets()).unwrap().gain;
    let d = GainDesign::new(k, lin.period() / 500.0, 0.04)
        .with_targets(targets())
        .with_rho(0.3);
    (lin, d)
}

#[test]
fn sigma_values() {
    assert_eq!(sigma(c(0.0, 0.0), 4.528), c(0.0, 0.0));
    // (e^{4.528} − 1)/4.528, evaluated independently in double precision
    assert!((sigma(c(1.0, 0.0), 4.528) - c(20.223769733536525, 0.0)).norm() < 1e-12);
    assert_eq!(sigma(c(0.3, -1.2), 0.0), c(0.3, -1.2));
    assert_eq!(sigma(c(0.3, -1.2), 1e-13), c(0.3, -1.2));
}

#[test]
fn kappa_roots_for_published_gain_sum() {
    let k0 = DVector::from_row_slice(&[-0.258, 4.786]);
    let b0 = DVector::from_row_slice(&[1.0, 1.0]);
    let kr = kappa_roots(&k0, &b0);
    assert_eq!(kr.l_max, 1);
    assert_eq!(kr.roots.len(), 3);
    assert_eq!(kr.roots[1], (0, c(1.0, 0.0)));
    assert!((kr.roots[2].1 - c(1.0, 1.387629263953089)).norm() < 1e-12);
    assert_eq!(kr.roots[0].1, kr.roots[2].1.conj());
    let wide = kappa_roots_with_margin(&k0, &b0, 2);
    assert_eq!(wide.roots.len(), 7);
    let none = kappa_roots(&DVector::from_row_slice(&[1.0, -1.0]), &b0);
    assert_eq!(none.roots, vec![(0, c(1.0, 0.0))]);
}

#[test]
fn asymptotic_multipliers_on_the_circle() {
    let eps = 0.04;
    assert_eq!(asymptotic_multiplier(0, 4.528, eps), c(1.0, 0.0));
    // independent evaluation of 1 − ε/2 + (ε/2)(c − 2πi)/(c + 2πi)
    let l1 = asymptotic_multiplier(1, 4.528, eps);
    assert!((l1 - c(0.9736728064470855, -0.018972786346342453)).norm() < 1e-14);
    for l in -6..=6 {
        for (cc, e) in [(4.528, 0.04), (-2.0, 0.3), (30.0, 0.999)] {
            let z = asymptotic_multiplier(l, cc, e);
            assert!(((z - (1.0 - e / 2.0)).norm() - e / 2.0).abs() < 1e-15);
        }
    }
    // ε → 1: the circle shrinks to radius 1/2 around 1/2
    let z = asymptotic_multiplier(1, 4.528, 0.999);
    assert!(((z - 0.5005).norm() - 0.4995).abs() < 1e-14);
}

#[test]
fn char_fn_vanishes_at_one() {
    let (lin, d) = hopf_design();
    let h1 = char_fn(c(1.0, 0.0), &lin, &d, &IntegratorOptions::default()).unwrap();
    let scale = char_fn(c(0.5, 0.0), &lin, &d, &IntegratorOptions::default()).unwrap().norm();
    assert!(h1.norm() < 1e-8 * scale.max(1.0), "{h1}");
    let pole = char_fn(c(0.96, 0.0), &lin, &d, &IntegratorOptions::default());
    assert!(matches!(pole, Err(crate::EtdfError::PoleProximity { .. })));
}

#[test]
fn char_fn_small_epsilon_limit() {
    let (lin, d) = hopf_design();
    let opts = IntegratorOptions::default();
    let lambda = c(-0.3, 0.2);
    let p1 = crate::ode::monodromy_parametrized(&lin, c(1.0, 0.0), &d, &opts).unwrap();
    let classical = (DMatrix::identity(2, 2) * lambda - p1).determinant();
    let mut prev = f64::INFINITY;
    for eps in [1e-2, 1e-3, 1e-4] {
        let h = char_fn(lambda, &lin, &d.clone().with_epsilon(eps), &opts).unwrap();
        let err = (h - classical).norm();
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 1e-2 * classical.norm());
}

#[test]
fn zero_gain_roots_are_uncontrolled_spectrum() {
    let lin = hopf_linearization(-0.25).unwrap();
    let d = GainDesign::new(DVector::zeros(2), lin.period() / 500.0, 0.5);
    let s = spectrum_char(&lin, &d, &CharFnOptions::default()).unwrap();
    assert!(s.multipliers.iter().any(|m| (m.value - PI.exp()).norm() < 1e-6));
    assert_eq!(s.of_class(MultiplierClass::Trivial).len(), 1);
    assert!(!s.is_stable());
    assert!((s.max_nontrivial_modulus() - PI.exp()).abs() < 1e-6);
}

#[test]
fn hopf_spectrum_structure() {
    let (lin, d) = hopf_design();
    let s = spectrum_char(&lin, &d, &CharFnOptions::default()).unwrap();
    let trivial: Vec<_> = s.multipliers.iter().filter(|m| (m.value - 1.0).norm() < 1e-6).collect();
    assert_eq!(trivial.len(), 1);
    // the assigned pair, checked against an independent scipy computation
    // (DOP853 at rtol 1e−11 on the same regularised impulse, fsolve on h)
    let assigned: Vec<Complex64> = s.of_class(MultiplierClass::Assigned).iter().map(|m| m.value).collect();
    let oracle = [c(0.11245123, 0.42679039), c(0.11245123, -0.42679039)];
    assert!(spectral_distance(&assigned, &oracle) < 1e-6, "{assigned:?}");
    for m in s.of_class(MultiplierClass::DelayInduced) {
        let off = ((m.value - (1.0 - 0.02)).norm() - 0.02).abs();
        assert!(off < 0.02, "{}", m.value);
    }
    assert!(s.is_stable());
    assert!(s.max_nontrivial_modulus() < 0.98);
    // conjugate symmetry
    let vals = s.values();
    let conj: Vec<Complex64> = vals.iter().map(|z| z.conj()).collect();
    assert!(spectral_distance(&vals, &conj) < 1e-9);
}

#[test]
fn operator_matches_char_fn_and_converges() {
    let (lin, d) = hopf_design();
    let opts = CharFnOptions::default();
    let s = spectrum_char(&lin, &d, &opts).unwrap();
    let ops: Vec<FloquetSpectrum> = [64, 128, 256]
        .iter()
        .map(|&n| operator_spectrum(&lin, &d, n, &opts).unwrap())
        .collect();
    let fine = ops[2].values();
    let triv = fine.iter().map(|z| (z - 1.0).norm()).fold(f64::INFINITY, f64::min);
    assert!(triv < 1e-6);
    for m in s.nontrivial().filter(|m| m.value.norm() >= 0.48) {
        let near = |o: &FloquetSpectrum| {
            o.values()
                .into_iter()
                .min_by(|a, b| (a - m.value).norm().total_cmp(&(b - m.value).norm()))
                .unwrap()
        };
        let (l64, l128, l256) = (near(&ops[0]), near(&ops[1]), near(&ops[2]));
        assert!((l256 - m.value).norm() < 1e-3);
        let order = richardson_order(l64, l128, l256);
        assert!((order - 2.0).abs() < 0.5, "{} order {order}", m.value);
    }
}

#[test]
fn operator_with_zero_gain() {
    let lin = hopf_linearization(-0.25).unwrap();
    let d = GainDesign::new(DVector::zeros(2), lin.period() / 500.0, 0.5);
    let o = operator_spectrum(&lin, &d, 32, &CharFnOptions::default()).unwrap();
    let vals = o.values();
    assert!(vals.iter().any(|z| (z - 1.0).norm() < 1e-6));
    assert!(vals.iter().any(|z| (z - PI.exp()).norm() < 1e-6));
    assert!(operator_spectrum(&lin, &d, 16, &CharFnOptions::default()).is_err());
    let mat = operator_matrix(&lin, &d, 32, &IntegratorOptions::default(), false).unwrap();
    let ev = crate::linalg::eigenvalues(&mat).unwrap();
    assert!(ev.iter().filter(|z| (*z - 0.5).norm() < 1e-9).count() >= 10);
}

#[test]
fn classical_spectrum_checks() {
    let (lin, d) = hopf_design();
    let opts = IntegratorOptions::default();
    let s = classical_spectrum(&lin, &d, &opts).unwrap();
    assert!(s.multipliers.iter().all(|m| m.value.norm() < 1.0));
    assert!(s.notes.is_empty());
    let z = classical_spectrum(&lin, &d.clone().with_k0(DVector::zeros(2)), &opts).unwrap();
    assert!((z.multipliers.iter().map(|m| m.value.norm()).fold(0.0, f64::max) - PI.exp()).abs() < 1e-6);
    assert!(z.notes.contains(&SpectrumNote::EtdfMustFailForSmallEpsilon));
}

#[test]
fn classical_spectrum_converges_linearly_in_delta() {
    let (lin, d) = hopf_design();
    let opts = IntegratorOptions::default();
    let tp = lin.period();
    let errs: Vec<f64> = [tp / 250.0, tp / 500.0, tp / 1000.0]
        .iter()
        .map(|&delta| {
            let s = classical_spectrum(&lin, &d.clone().with_delta(delta), &opts).unwrap();
            spectral_distance(&s.values(), &targets())
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[1] / w[0];
        assert!((ratio - 0.5).abs() < 0.15, "{errs:?}");
    }
}

#[test]
fn hopf_adjoint_is_velocity_direction() {
    let lin = hopf_linearization(-0.25).unwrap();
    let orbit = hopf_orbit(-0.25).unwrap();
    let adj = adjoint_eigenvector(&lin, orbit.xdot0(), &IntegratorOptions::default()).unwrap();
    for i in 0..40 {
        let t = i as f64 * 0.19;
        let v = adj.eval(t);
        // x̄ = [cos t, sin t]/r with r = 1/2 after normalisation
        assert!((v[0] - 2.0 * t.cos()).abs() < 1e-7, "t = {t}: {v}");
        assert!((v[1] - 2.0 * t.sin()).abs() < 1e-7);
        assert!((v.dot(&orbit.velocity(t)) - 1.0).abs() < 1e-7);
    }
}

#[test]
fn constant_generator_adjoint_is_left_null_vector() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -1.0]);
    let lin = Linearization::new(1.0, move |_| a.clone(), |_| DVector::from_row_slice(&[0.0, 1.0])).unwrap();
    let adj = adjoint_eigenvector(&lin, &DVector::from_row_slice(&[1.0, 0.0]), &IntegratorOptions::default()).unwrap();
    for t in [0.0, 0.3, 0.9] {
        assert!((adj.eval(t) - DVector::from_row_slice(&[1.0, 1.0])).norm() < 1e-9);
    }
    let degenerate = Linearization::new(1.0, |_| DMatrix::zeros(2, 2), |_| DVector::from_row_slice(&[0.0, 1.0])).unwrap();
    assert!(matches!(
        adjoint_eigenvector(&degenerate, &DVector::from_row_slice(&[1.0, 0.0]), &IntegratorOptions::default()),
        Err(crate::EtdfError::DegenerateTrivialMultiplier)
    ));
}

#[test]
fn hopf_criterion_is_half_gain_sum() {
    let lin = hopf_linearization(-0.25).unwrap();
    let orbit = hopf_orbit(-0.25).unwrap();
    let opts = IntegratorOptions::default();
    let ratio = |k1: f64, k2: f64| constant_gain_criterion(&lin, &orbit, &DVector::from_row_slice(&[k1, k2]), &opts).unwrap();
    assert!(ratio(0.0, 0.0).abs() < 1e-12);
    assert!(ratio(1.0, -1.0).abs() < 1e-8);
    for (k1, k2) in [(2.0, 0.5), (-1.0, -3.0), (0.7, -0.2)] {
        assert!((ratio(k1, k2) - (k1 + k2) / 2.0).abs() < 1e-7);
    }
}

#[test]
fn constant_gains_with_wrong_sign_are_unstable() {
    let lin = hopf_linearization(-0.25).unwrap();
    let d = GainDesign::new(DVector::from_row_slice(&[-0.5, 0.2]), 1.0, 0.02).with_gating(Gating::Constant);
    let s = spectrum_char(&lin, &d, &CharFnOptions::default()).unwrap();
    assert!(!s.is_stable());
}

#[test]
fn annulus_scan_finds_delay_roots() {
    let (lin, d) = hopf_design();
    let opts = CharFnOptions::default();
    let s = spectrum_char(&lin, &d, &opts).unwrap();
    let scan = AnnulusScan {
        n_radial: 6,
        n_angular: 48,
        ..Default::default()
    };
    let found = scan_annulus(&lin, &d, &scan, &opts).unwrap();
    for m in s.of_class(MultiplierClass::DelayInduced) {
        if (m.value - 0.96).norm() >= 0.02 {
            assert!(found.iter().any(|z| (z - m.value).norm() < 1e-7), "{}", m.value);
        }
    }
}

#[test]
fn asymptotic_spectrum_lists_all_families() {
    let (lin, d) = hopf_design();
    let s = asymptotic_spectrum(&lin, &d);
    assert_eq!(s.of_class(MultiplierClass::Trivial).len(), 1);
    assert_eq!(s.of_class(MultiplierClass::Assigned).len(), 2);
    assert_eq!(s.of_class(MultiplierClass::DelayInduced).len(), 2);
}

/// Near p = −0.358 the assigned pair turns real and the ℓ = ±1 roots split
/// on the real axis; the asymptotic seeds then miss them and the grid
/// fallback has to find them.
#[test]
fn lost_delay_seeds_are_recovered() {
    let lin = hopf_linearization(-0.3578947368421053).unwrap();
    let p0 = monodromy_uncontrolled(&lin, &IntegratorOptions::default()).unwrap();
    let k = design_gains(&p0, &lin.b(0.0), &targets()).unwrap().gain;
    let d = GainDesign::new(k, lin.period() / 500.0, 0.04);
    let opts = CharFnOptions::default();
    let s = spectrum_char(&lin, &d, &opts).unwrap();
    let op = operator_spectrum(&lin, &d, 256, &opts).unwrap();
    let delay = s.of_class(MultiplierClass::DelayInduced);
    assert!(delay.len() >= 3, "{:?}", s.values());
    // real root found by a sign change of h in an independent scan
    assert!(delay.iter().any(|m| m.value.im == 0.0 && (m.value.re - 0.99541).abs() < 1e-4));
    let top = op.values().into_iter().filter(|z| (z - 1.0).norm() > 1e-6).map(|z| z.norm()).fold(0.0, f64::max);
    assert!((s.max_nontrivial_modulus() - top).abs() < 1e-4);

    let off = CharFnOptions {
        fallback_scan: None,
        ..CharFnOptions::default()
    };
    let blind = spectrum_char(&lin, &d, &off).unwrap();
    assert!(blind.of_class(MultiplierClass::DelayInduced).is_empty());
    assert!(blind.has_note(|n| matches!(n, SpectrumNote::UnresolvedSeed { .. })));
}
