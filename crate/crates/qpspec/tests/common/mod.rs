#![allow(dead_code)]

use num_complex::Complex64 as C64;
use qpspec::cocycle::SchrodingerCocycle;
use qpspec::mat2::CMat;
use qpspec::torus::{FrequencyVector, TorusSeries, ValueClass};
use qpspec::weyl::TruncatedOperator;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn amo(d: usize, lambda: f64, energy: f64) -> SchrodingerCocycle {
    let alpha = if d == 1 { FrequencyVector::golden() } else { FrequencyVector::two_frequency() };
    SchrodingerCocycle::new(alpha, TorusSeries::cos_sum(d), lambda, energy).unwrap()
}

pub fn cplx(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_matrix(rng: &mut ChaCha8Rng) -> CMat {
    CMat::new(cplx(rng), cplx(rng), cplx(rng), cplx(rng))
}

/// Random sl2R-valued series of the given degree, rescaled to ||f||_0 = size.
pub fn random_sl2r(rng: &mut ChaCha8Rng, d: usize, degree: i32, size: f64) -> TorusSeries {
    let mut coeffs = Vec::new();
    let points: Vec<Vec<i32>> = if d == 1 {
        (-degree..=degree).map(|n| vec![n]).collect()
    } else {
        (-degree..=degree).flat_map(|a| (-degree..=degree).map(move |b| vec![a, b])).collect()
    };
    for n in points {
        let (a, b, c) = (cplx(rng), cplx(rng), cplx(rng));
        coeffs.push((n, CMat::new(a, b, c, -a)));
    }
    let f = TorusSeries::from_coeffs(d, ValueClass::Sl2R, coeffs).unwrap().symmetrize();
    let norm = f.norm_r(0.0, 64);
    f.scale(C64::new(size / norm, 0.0))
}

/// Eigenvalue of the truncation nearest to e.
pub fn snap(sc: &SchrodingerCocycle, theta: &[f64], l: usize, e: f64) -> f64 {
    qpspec::holder::nearest_eigenvalue(&TruncatedOperator::new(sc, theta, l), e)
}
