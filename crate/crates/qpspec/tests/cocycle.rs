mod common;

use common::{amo, rng, snap};
use proptest::prelude::*;
use qpspec::cocycle::{
    ids, iterate, lyapunov_exponent, rotation_number, uniform_hyperbolicity_probe, CocycleMap, FnCocycle,
    SchrodingerCocycle,
};
use qpspec::mat2::{self, complexify, rotation, CMat, RMat};
use qpspec::torus::dist_to_z;
use qpspec::weyl::TruncatedOperator;
use rand::Rng;

#[test]
fn zeroth_iterate_is_identity() {
    let sc = amo(2, 0.3, 0.7);
    assert_eq!(iterate(&sc, 0, &[0.1, 0.2]), CMat::identity());
}

#[test]
fn iterate_matches_direct_loop() {
    let mut g = rng(21);
    for _ in 0..5 {
        let sc = amo(2, g.random_range(0.0..0.5), g.random_range(-3.0..3.0));
        let theta = [g.random::<f64>(), g.random::<f64>()];
        let mut direct = CMat::identity();
        for k in 0..37 {
            let th = [theta[0] + k as f64 * sc.alpha.alpha[0], theta[1] + k as f64 * sc.alpha.alpha[1]];
            let v = sc.lambda * ((2.0 * std::f64::consts::PI * th[0]).cos() + (2.0 * std::f64::consts::PI * th[1]).cos());
            direct = complexify(&RMat::new(sc.energy - v, -1.0, 1.0, 0.0)) * direct;
        }
        let it = iterate(&sc, 37, &theta);
        assert!((it - direct).norm() <= 1e-12 * direct.norm());
    }
}

#[test]
fn determinant_stays_one() {
    let sc = amo(1, 0.1, 0.0);
    let m = iterate(&sc, 10_000, &[0.2]);
    assert!((mat2::det(&m) - 1.0).norm() < 1e-9);
}

#[test]
fn lyapunov_of_constant_cocycles() {
    let hyperbolic = lyapunov_exponent(&SchrodingerCocycle::free(3.0), 2000, 2, 0);
    assert!((hyperbolic - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-3);
    let elliptic = lyapunov_exponent(&SchrodingerCocycle::free(1.0), 100_000, 2, 0);
    assert!(elliptic.abs() < 2e-3);
}

#[test]
fn subcritical_lyapunov_vanishes_across_seeds() {
    let sc = amo(1, 0.1, 0.0);
    for seed in [1, 2] {
        assert!(lyapunov_exponent(&sc, 100_000, 4, seed) <= 5e-3);
    }
}

#[test]
fn lyapunov_is_invariant_under_bounded_conjugation() {
    let sc = amo(1, 0.1, 2.5);
    let b = complexify(&RMat::new(2.0, 0.3, 0.0, 0.5));
    let b_inv = mat2::sl2_inv(&b);
    let conj = FnCocycle { alpha: sc.alpha.clone(), f: |th: &[f64]| b_inv * sc.matrix(th) * b };
    let l0 = lyapunov_exponent(&sc, 20_000, 4, 3);
    let l1 = lyapunov_exponent(&conj, 20_000, 4, 3);
    assert!((l0 - l1).abs() < 2.0 * (2.0f64.ln() * 2.0 / 20_000.0) + 1e-6, "{l0} vs {l1}");
}

#[test]
fn rotation_numbers_of_constant_cocycles() {
    assert!((rotation_number(&SchrodingerCocycle::free(0.0), 10_000, &[0.0]).rho - 0.25).abs() < 1e-4);
    assert!(rotation_number(&SchrodingerCocycle::free(2.0), 100_000, &[0.0]).rho < 1e-4);
    assert!((rotation_number(&SchrodingerCocycle::free(-3.0), 10_000, &[0.0]).rho - 0.5).abs() < 1e-4);
}

#[test]
fn degree_one_conjugation_shifts_rotation_by_half_frequency() {
    let sc = amo(1, 0.1, 0.5);
    let alpha = sc.alpha.alpha[0];
    let conj = FnCocycle {
        alpha: sc.alpha.clone(),
        f: |th: &[f64]| {
            let r0 = complexify(&rotation(th[0] / 2.0));
            let r1 = complexify(&rotation((th[0] + alpha) / 2.0));
            mat2::sl2_inv(&r1) * sc.matrix(th) * r0
        },
    };
    let n = 200_000;
    let a = rotation_number(&sc, n, &[0.0]).lifted;
    let b = rotation_number(&conj, n, &[0.0]).lifted;
    assert!(dist_to_z(a - b - alpha / 2.0) < 1e-4, "{a} {b}");
}

#[test]
fn ids_examples() {
    assert!((ids(&SchrodingerCocycle::free(0.0), 10_000, &[0.0]) - 0.5).abs() < 2e-4);
    assert!(ids(&SchrodingerCocycle::free(-3.0), 10_000, &[0.0]).abs() < 2e-4);
}

#[test]
fn ids_is_monotone_and_matches_counting() {
    let sc = amo(1, 0.1, 0.0);
    let op = TruncatedOperator::new(&sc, &[0.0], 2000);
    let mut last = -1.0;
    for i in 0..12 {
        let e = -2.4 + 4.8 * i as f64 / 11.0;
        let n = ids(&sc.at_energy(e), 50_000, &[0.0]);
        assert!((0.0..=1.0).contains(&n));
        assert!(n >= last - 1e-3);
        assert!((n - op.count_below(e) as f64 / op.len() as f64).abs() < 2e-3);
        last = n;
    }
}

#[test]
fn hyperbolicity_probe_examples() {
    let p = uniform_hyperbolicity_probe(&SchrodingerCocycle::free(3.0), 200, 4);
    assert!(p.hyperbolic);
    assert!((p.margin - 0.9624).abs() < 1e-3);
    assert!(!uniform_hyperbolicity_probe(&SchrodingerCocycle::free(0.0), 200, 4).hyperbolic);
    let base = amo(1, 0.1, 0.0);
    let e = snap(&base, &[0.0], 2000, 0.0);
    assert!(!uniform_hyperbolicity_probe(&base.at_energy(e), 500, 8).hyperbolic);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cocycle_property(n in 0i64..=50, m in 0i64..=50, e in -3.0f64..3.0, th in 0.0f64..1.0) {
        let sc = amo(1, 0.3, e);
        let lhs = iterate(&sc, n + m, &[th]);
        let rhs = iterate(&sc, n, &sc.alpha.shift(&[th], m as f64)) * iterate(&sc, m, &[th]);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0));
    }

    #[test]
    fn negative_and_positive_iterates_cancel(n in 1i64..=40, th in 0.0f64..1.0) {
        let sc = amo(2, 0.2, 0.4);
        let fwd = iterate(&sc, n, &[th, 0.5]);
        let back = iterate(&sc, -n, &sc.alpha.shift(&[th, 0.5], n as f64));
        prop_assert!((back * fwd - CMat::identity()).norm() < 1e-9);
    }
}
