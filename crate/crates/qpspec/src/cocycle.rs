//! Quasi-periodic SL(2) cocycles: iterates, Lyapunov exponent, fibered rotation
//! number, integrated density of states and a uniform-hyperbolicity probe.

use crate::error::{Error, Result};
use crate::mat2::{self, CMat, RMat, C64, ONE};
use crate::torus::{FrequencyVector, TorusSeries, ValueClass};
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A map theta -> A(theta) in SL(2) together with its frequency.
pub trait CocycleMap: Sync {
    fn alpha(&self) -> &FrequencyVector;

    fn matrix(&self, theta: &[f64]) -> CMat;

    fn real_matrix(&self, theta: &[f64]) -> RMat {
        mat2::real_part(&self.matrix(theta))
    }
}

/// Cocycle (alpha, A) with A given by a Fourier series.
#[derive(Clone, Debug)]
pub struct Cocycle {
    pub alpha: FrequencyVector,
    pub a: TorusSeries,
}

impl Cocycle {
    pub fn new(alpha: FrequencyVector, a: TorusSeries) -> Result<Self> {
        if a.d() != alpha.d() {
            return Err(Error::Invalid("cocycle dimension mismatch".into()));
        }
        let m = 16;
        for v in a.eval_grid(m, &vec![0.0; a.d()]) {
            if (mat2::det(&v) - ONE).norm() > 1e-10 {
                return Err(Error::Invalid("cocycle matrix with determinant != 1".into()));
            }
        }
        Ok(Self { alpha, a })
    }
}

impl CocycleMap for Cocycle {
    fn alpha(&self) -> &FrequencyVector {
        &self.alpha
    }

    fn matrix(&self, theta: &[f64]) -> CMat {
        self.a.evaluate(theta, &[])
    }
}

/// Cocycle defined by a closure, used for conjugated and perturbed cocycles.
pub struct FnCocycle<F> {
    pub alpha: FrequencyVector,
    pub f: F,
}

impl<F: Fn(&[f64]) -> CMat + Sync> CocycleMap for FnCocycle<F> {
    fn alpha(&self) -> &FrequencyVector {
        &self.alpha
    }

    fn matrix(&self, theta: &[f64]) -> CMat {
        (self.f)(theta)
    }
}

/// Schrodinger cocycle S(theta) = (E - lambda V(theta), -1; 1, 0).
#[derive(Clone, Debug)]
pub struct SchrodingerCocycle {
    pub alpha: FrequencyVector,
    pub v: TorusSeries,
    pub lambda: f64,
    pub energy: f64,
}

impl SchrodingerCocycle {
    pub fn new(alpha: FrequencyVector, v: TorusSeries, lambda: f64, energy: f64) -> Result<Self> {
        if v.d() != alpha.d() {
            return Err(Error::Invalid("potential and frequency dimensions differ".into()));
        }
        if v.value_class() != ValueClass::RealScalar {
            return Err(Error::Invalid("potential must be real-scalar".into()));
        }
        Ok(Self { alpha, v, lambda, energy })
    }

    /// Free cocycle (lambda = 0) in dimension one.
    pub fn free(energy: f64) -> Self {
        Self {
            alpha: FrequencyVector::golden(),
            v: TorusSeries::cos_sum(1),
            lambda: 0.0,
            energy,
        }
    }

    pub fn at_energy(&self, energy: f64) -> Self {
        Self { energy, ..self.clone() }
    }

    /// lambda V(theta).
    pub fn potential(&self, theta: &[f64]) -> f64 {
        if self.lambda == 0.0 {
            0.0
        } else {
            self.lambda * self.v.scalar_value(theta)
        }
    }

    /// The same cocycle as a Fourier-series cocycle.
    pub fn to_cocycle(&self) -> Cocycle {
        let d = self.alpha.d();
        let mut base = CMat::zeros();
        base[(0, 0)] = C64::new(self.energy, 0.0);
        base[(0, 1)] = -ONE;
        base[(1, 0)] = ONE;
        let mut shift = TorusSeries::zero(d, ValueClass::SL2R);
        for (n, c) in self.v.coeffs() {
            let mut m = CMat::zeros();
            m[(0, 0)] = -c[(0, 0)] * self.lambda;
            shift = shift.add(&TorusSeries::from_coeffs(d, ValueClass::SL2R, [(n.clone(), m)]).unwrap());
        }
        let a = TorusSeries::constant(d, base, ValueClass::SL2R).add(&shift);
        Cocycle { alpha: self.alpha.clone(), a }
    }
}

impl CocycleMap for SchrodingerCocycle {
    fn alpha(&self) -> &FrequencyVector {
        &self.alpha
    }

    fn matrix(&self, theta: &[f64]) -> CMat {
        mat2::complexify(&self.real_matrix(theta))
    }

    fn real_matrix(&self, theta: &[f64]) -> RMat {
        RMat::new(self.energy - self.potential(theta), -1.0, 1.0, 0.0)
    }
}

/// A_n(theta) = A(theta + (n-1) alpha) ... A(theta) for n >= 0 and
/// A_n(theta) = A(theta + n alpha)^{-1} ... A(theta - alpha)^{-1} for n < 0.
pub fn iterate<C: CocycleMap + ?Sized>(c: &C, n: i64, theta: &[f64]) -> CMat {
    let alpha = c.alpha();
    let mut out = CMat::identity();
    if n >= 0 {
        for k in 0..n {
            out = c.matrix(&alpha.shift(theta, k as f64)) * out;
        }
    } else {
        for k in 1..=(-n) {
            out = mat2::sl2_inv(&c.matrix(&alpha.shift(theta, -(k as f64)))) * out;
        }
    }
    out
}

/// ln ||A_n(theta)|| accumulated with a renormalization every 32 steps.
fn log_norm_growth<C: CocycleMap + ?Sized>(c: &C, theta: &[f64], checkpoints: &[usize]) -> Vec<f64> {
    let alpha = c.alpha();
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    let mut m = CMat::identity();
    let mut log_scale = 0.0;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    for k in 1..=last {
        m = c.matrix(&alpha.shift(theta, (k - 1) as f64)) * m;
        if k % 32 == 0 {
            let s = mat2::op_norm(&m);
            log_scale += s.ln();
            m /= C64::new(s, 0.0);
        }
        while next < checkpoints.len() && checkpoints[next] == k {
            out.push(log_scale + mat2::op_norm(&m).ln());
            next += 1;
        }
    }
    out
}

/// (1/n) ln ||A_n(theta)|| at a single phase.
pub fn lyapunov_at<C: CocycleMap + ?Sized>(c: &C, n: usize, theta: &[f64]) -> f64 {
    log_norm_growth(c, theta, &[n])[0] / n as f64
}

/// Mean of (1/n) ln ||A_n(theta)|| over `theta_samples` seeded random phases.
pub fn lyapunov_exponent<C: CocycleMap + ?Sized>(
    c: &C,
    n: usize,
    theta_samples: usize,
    seed: u64,
) -> f64 {
    let phases = random_phases(c.alpha().d(), theta_samples, seed);
    phases.iter().map(|th| lyapunov_at(c, n, th)).sum::<f64>() / phases.len() as f64
}

/// Reproducible uniform phases in [0,1)^d.
pub fn random_phases(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count.max(1)).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Fibered rotation number estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationNumberEstimate {
    /// Folded value in [0, 1/2].
    pub rho: f64,
    /// Mean lifted increment per step in turns, before folding.
    pub lifted: f64,
    pub iterations: usize,
    pub uncertainty: f64,
}

/// Angle increment of A acting on w, lifted through the polar decomposition A = R_omega S
/// with S symmetric positive definite: omega in (-pi, pi] plus the S-increment in
/// (-pi/2, pi/2).
pub fn angle_increment(a: &RMat, w: &Vector2<f64>) -> f64 {
    let omega = (a[(1, 0)] - a[(0, 1)]).atan2(a[(0, 0)] + a[(1, 1)]);
    let (s, co) = omega.sin_cos();
    let sym = RMat::new(co, s, -s, co) * a;
    let v = sym * w;
    let cross = w.x * v.y - w.y * v.x;
    let dot = w.x * v.x + w.y * v.y;
    omega + cross.atan2(dot)
}

/// Propagates a direction along the orbit of theta and averages the lifted increments.
pub fn rotation_number<C: CocycleMap + ?Sized>(c: &C, n: usize, theta: &[f64]) -> RotationNumberEstimate {
    let alpha = c.alpha();
    let mut w = Vector2::new(1.0, 0.0);
    let mut total = 0.0;
    for k in 0..n {
        let a = c.real_matrix(&alpha.shift(theta, k as f64));
        total += angle_increment(&a, &w);
        w = a * w;
        w /= w.norm();
    }
    let lifted = total / (2.0 * PI * n as f64);
    let x = lifted.rem_euclid(1.0);
    let rho = if x > 0.5 { 1.0 - x } else { x };
    RotationNumberEstimate { rho, lifted, iterations: n, uncertainty: 1.0 / n as f64 }
}

/// Integrated density of states N(E) = 1 - 2 rho(E).
pub fn ids(sc: &SchrodingerCocycle, n: usize, theta: &[f64]) -> f64 {
    1.0 - 2.0 * rotation_number(sc, n, theta).rho
}

/// Outcome of the uniform-hyperbolicity heuristic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityProbe {
    pub hyperbolic: bool,
    /// Fitted exponential rate (ln m(2n) - ln m(n)) / n, m = min over the grid of the norm.
    pub margin: f64,
    /// min over the grid of (1/n) ln ||A_n||.
    pub rate_n: f64,
}

/// Checks whether min over a theta grid of ||A_n(theta)|| grows like e^{cn} with a rate
/// that agrees between n and 2n.
pub fn uniform_hyperbolicity_probe<C: CocycleMap + ?Sized>(c: &C, n: usize, grid: usize) -> HyperbolicityProbe {
    let d = c.alpha().d();
    let total = grid.pow(d as u32);
    let mut min_n = f64::INFINITY;
    let mut min_2n = f64::INFINITY;
    for idx in 0..total {
        let mut rest = idx;
        let mut theta = vec![0.0; d];
        for t in theta.iter_mut().rev() {
            *t = (rest % grid) as f64 / grid as f64;
            rest /= grid;
        }
        let logs = log_norm_growth(c, &theta, &[n, 2 * n]);
        min_n = min_n.min(logs[0]);
        min_2n = min_2n.min(logs[1]);
    }
    let margin = (min_2n - min_n) / n as f64;
    let rate_n = min_n / n as f64;
    let threshold = (4.0 / n as f64).max(1e-4);
    let stable = (rate_n - margin).abs() <= 0.5 * margin;
    HyperbolicityProbe { hyperbolic: margin > threshold && rate_n > threshold && stable, margin, rate_n }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_turn_has_order_four() {
        let sc = SchrodingerCocycle::free(0.0);
        let m = iterate(&sc, 4, &[0.3]);
        assert!((m - CMat::identity()).norm() < 1e-14);
    }

    #[test]
    fn negative_iterate_inverts() {
        let sc = SchrodingerCocycle::new(FrequencyVector::golden(), TorusSeries::cos_sum(1), 0.7, 0.4)
            .unwrap();
        let th = [0.123];
        let fwd = iterate(&sc, 5, &sc.alpha.shift(&th, -5.0));
        let back = iterate(&sc, -5, &th);
        assert!((fwd * back - CMat::identity()).norm() < 1e-12);
    }

    #[test]
    fn schrodinger_series_matches_closed_form() {
        let sc = SchrodingerCocycle::new(FrequencyVector::two_frequency(), TorusSeries::cos_sum(2), 0.3, 1.1)
            .unwrap();
        let c = sc.to_cocycle();
        let th = [0.2, 0.7];
        assert!((c.matrix(&th) - sc.matrix(&th)).norm() < 1e-14);
    }

    #[test]
    fn increment_of_rotation_is_its_angle() {
        let w = Vector2::new(0.6, 0.8);
        let a = mat2::rotation(0.3);
        assert!((angle_increment(&a, &w) - 2.0 * PI * 0.3).abs() < 1e-14);
    }

    #[test]
    fn increment_of_large_negative_trace_is_near_pi() {
        let a = RMat::new(-50.0, -1.0, 1.0, 0.0);
        for phi in [0.0, 0.4, 1.3, 2.9] {
            let w = Vector2::new(f64::cos(phi), f64::sin(phi));
            let inc = angle_increment(&a, &w);
            assert!(inc > PI / 2.0 - 1e-12 && inc < 1.5 * PI, "{inc}");
        }
    }
}
