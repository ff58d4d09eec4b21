mod common;

use common::{amo, random_sl2r, rng, snap};
use num_complex::Complex64 as C64;
use qpspec::cocycle::{rotation_number, uniform_hyperbolicity_probe, FnCocycle};
use qpspec::mat2::{self, rotation, CMat, RMat};
use qpspec::kam::{
    cn_bound_check, identity_residual, im_xi_check, kam_iterate, kam_step, resonance_scan, schrodinger_input,
    Conjugation, KamConfig, StepKind,
};
use qpspec::torus::{dist_to_z, FrequencyVector, TorusSeries, ValueClass};
use qpspec::Error;
use rand::Rng;
use std::f64::consts::PI;

#[test]
fn scan_finds_nothing_far_from_resonances() {
    let alpha = FrequencyVector::golden();
    // 2 xi / (2 pi) = 0.5 is at distance >= 0.1 from <n, alpha> mod 1 for |n| <= 3
    let xi = C64::new(PI * 0.5, 0.0);
    for n in -3i32..=3 {
        if n != 0 {
            assert!(dist_to_z(0.5 - alpha.dot(&[n])) >= 0.1);
        }
    }
    assert_eq!(resonance_scan(xi, &alpha, 3, 1e-3), None);
}

#[test]
fn scan_returns_exact_resonance() {
    let alpha = FrequencyVector::two_frequency();
    let n_star = vec![2, -1];
    let xi = C64::new(PI * alpha.dot(&n_star), 0.0);
    assert_eq!(resonance_scan(xi, &alpha, 5, 1e-6), Some(n_star));
}

#[test]
fn scan_returns_constructed_near_resonance() {
    let mut g = rng(61);
    let alpha = FrequencyVector::two_frequency();
    let eps: f64 = 1e-4;
    let threshold = eps.powf(0.1);
    for n_star in [vec![1, 0], vec![0, 1], vec![1, 1]] {
        let sign = if g.random::<bool>() { 1.0 } else { -1.0 };
        let target = alpha.dot(&n_star) + sign * threshold / 2.0;
        let found = resonance_scan(C64::new(PI * target, 0.0), &alpha, 4, threshold);
        let found = found.expect("resonance must be detected");
        assert!(dist_to_z(target - alpha.dot(&found)) < threshold);
        assert!(found.iter().map(|k| k.abs()).max() <= n_star.iter().map(|k| k.abs()).max());
    }
}

#[test]
fn zero_perturbation_step_is_trivial() {
    let cfg = KamConfig::default();
    let a = RMat::new(0.3, -1.0, 1.0, 0.0);
    let f = TorusSeries::zero(1, ValueClass::Sl2R);
    let out = kam_step(&a, &f, 0.1, 0.08, &FrequencyVector::golden(), &cfg).unwrap();
    assert_eq!(out.b_bar, Conjugation::identity(1));
    assert_eq!(out.a_plus, a);
    assert!(out.f_plus.is_zero());
}

#[test]
fn nonresonant_step_contracts() {
    let cfg = KamConfig::default();
    let alpha = FrequencyVector::golden();
    let a = mat2::rotation(0.118 / 2.0);
    let (r, r_next) = (0.1, 0.08);
    let f = random_sl2r(&mut rng(67), 1, 3, 1.0);
    let f = f.scale(C64::new(1e-6 / f.norm_r(r, cfg.grid), 0.0));
    let out = kam_step(&a, &f, r, r_next, &alpha, &cfg).unwrap();
    assert_eq!(out.record.kind, StepKind::NonResonant);
    assert!(out.record.eps_next <= 1e-9, "{}", out.record.eps_next);
    assert!(out.record.a_shift <= 2.0 * mat2::op_norm_real(&a) * 1e-6);
    let res = identity_residual(&alpha, &a, &f, &out.b_bar, &out.a_plus, &out.f_plus, 64);
    assert!(res <= 10.0 * 1e-6);
}

#[test]
fn engineered_resonance_changes_degree() {
    let cfg = KamConfig::default();
    let alpha = FrequencyVector::golden();
    let n_star = [1];
    let a = rotation(alpha.dot(&n_star) / 2.0 + 1e-5);
    let (r, r_next) = (0.1, 0.08);
    let f = random_sl2r(&mut rng(71), 1, 2, 1.0);
    let eps = 1e-6;
    let f = f.scale(C64::new(eps / f.norm_r(r, cfg.grid), 0.0));
    let out = kam_step(&a, &f, r, r_next, &alpha, &cfg).unwrap();
    assert_eq!(out.record.kind, StepKind::Resonant);
    let deg = out.b_bar.degree();
    assert!(deg == vec![1] || deg == vec![-1], "{deg:?}");
    assert!(out.b_bar.sign_ambiguous());
    let a_plus = mat2::complexify(&out.a_plus);
    assert!(mat2::op_norm(&(a_plus - CMat::identity())) <= 2.0 * (2.0 * eps.powf(0.1)));
    assert!(out.record.eps_next <= eps);
    let res = identity_residual(&alpha, &a, &f, &out.b_bar, &out.a_plus, &out.f_plus, 64);
    assert!(res <= 10.0 * eps);
}

#[test]
fn zero_input_terminates_immediately() {
    let cfg = KamConfig::default();
    let f0 = TorusSeries::zero(2, ValueClass::Sl2R);
    let state = kam_iterate(&RMat::new(0.3, -1.0, 1.0, 0.0), &f0, &FrequencyVector::two_frequency(), &cfg).unwrap();
    assert!(state.ledger.is_empty());
    assert_eq!(state.b, Conjugation::identity(2));
}

fn run(e: f64) -> qpspec::kam::KamState {
    let sc = amo(2, 0.05, e);
    let (a0, f0) = schrodinger_input(&sc);
    kam_iterate(&a0, &f0, &sc.alpha, &KamConfig::default()).unwrap()
}

#[test]
fn schrodinger_input_converges() {
    let state = run(0.3);
    let last = state.ledger.last().unwrap();
    assert!(last.eps_next < 1e-12);
    assert!(state.ledger.len() <= 6);
    for pair in state.ledger.windows(2) {
        assert!(pair[1].eps < pair[0].eps);
    }
    assert!(state.identity_residual(64) <= 10.0 * state.eps_j.max(1e-14));
    let cfg = KamConfig::default();
    for (j, rec) in state.ledger.iter().enumerate() {
        assert!((rec.r - cfg.radius(j)).abs() < 1e-15);
        assert!(rec.contracts(cfg.floor));
    }
}

#[test]
fn gap_energy_is_hyperbolic_and_still_contracts() {
    let sc = amo(2, 0.05, 3.0);
    assert!(uniform_hyperbolicity_probe(&sc, 200, 4).hyperbolic);
    let state = run(3.0);
    assert!(state.ledger.last().unwrap().eps_next < 1e-12);
}

#[test]
fn oversized_input_is_rejected() {
    let sc = amo(2, 2.0, 0.0);
    let (a0, f0) = schrodinger_input(&sc);
    assert!(matches!(kam_iterate(&a0, &f0, &sc.alpha, &KamConfig::default()), Err(Error::Hypothesis(_))));
}

#[test]
fn corner_bound_on_nonresonant_and_resonant_runs() {
    let quiet = run(0.3);
    assert!(quiet.ledger.iter().all(|r| r.kind == StepKind::NonResonant));
    assert!(quiet.b_norm(64) <= 2.0);
    assert!(cn_bound_check(&quiet, 64).holds);
    let resonant = run(1.0);
    assert!(resonant.ledger.iter().any(|r| r.kind == StepKind::Resonant));
    assert!(cn_bound_check(&resonant, 64).holds);
}

#[test]
fn corner_bound_audit() {
    let mut g = rng(73);
    for _ in 0..20 {
        let state = run(g.random_range(-2.2..2.2));
        assert!(cn_bound_check(&state, 32).holds);
    }
}

#[test]
fn imaginary_part_of_xi() {
    let free = {
        let sc = amo(2, 0.0, 0.0);
        let (a0, f0) = schrodinger_input(&sc);
        kam_iterate(&a0, &f0, &sc.alpha, &KamConfig::default()).unwrap()
    };
    assert_eq!(free.xi.im, 0.0);
    let e = snap(&amo(2, 0.05, 0.0), &[0.0, 0.0], 2000, 0.0);
    assert!(im_xi_check(&run(e)).holds);
}

#[test]
fn nonresonant_steps_at_most_double_the_conjugation() {
    let state = run(0.3);
    let mut prev = 1.0;
    for rec in &state.ledger {
        if rec.kind == StepKind::NonResonant {
            assert!(rec.b_norm <= 2.0 * prev);
        }
        prev = rec.b_norm;
    }
}

#[test]
fn degree_accounts_for_rotation_number() {
    let state = run(1.0);
    assert!(state.degree.iter().any(|&k| k != 0));
    let sc = amo(2, 0.05, 1.0);
    let (a, f) = (mat2::complexify(&state.a), state.f.clone());
    let reduced = FnCocycle { alpha: sc.alpha.clone(), f: move |th: &[f64]| a * mat2::exp_traceless(&f.evaluate(th, &[])) };
    let n = 100_000;
    let rho0 = rotation_number(&sc, n, &[0.0, 0.0]).lifted;
    let rho_j = rotation_number(&reduced, n, &[0.0, 0.0]).lifted;
    let shift = sc.alpha.dot(&state.degree) / 2.0;
    let best = [1.0, -1.0]
        .iter()
        .flat_map(|s1| [1.0, -1.0].map(|s2| dist_to_z(rho0 - s1 * rho_j - s2 * shift)))
        .fold(f64::INFINITY, f64::min);
    assert!(best < 1e-3, "rho0 {rho0} rho_j {rho_j} shift {shift}");
}

#[test]
fn trace_lines_carry_the_documented_fields() {
    let state = run(1.0);
    for rec in &state.ledger {
        let v: serde_json::Value = serde_json::from_str(&rec.trace_line().unwrap()).unwrap();
        for key in ["j", "kind", "N", "resonance", "eps", "B_norm", "A_spec", "residual"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        for key in ["re_xi", "im_xi", "c"] {
            assert!(v["A_spec"].get(key).is_some());
        }
    }
}
