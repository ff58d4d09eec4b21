//! Odd-power sums of upper-triangular unimodular matrices in closed form,
//! their two-case bounds, the perturbation estimate, and unitary triangularization.

use crate::cocycle::{iterate, CocycleMap};
use crate::error::{Error, Result};
use crate::mat2::{self, CMat, RMat, C64, ONE, ZERO};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// T = (e^{2 pi i gamma}, c; 0, e^{-2 pi i gamma}).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangularUnimodular {
    pub gamma: f64,
    pub c: C64,
}

impl TriangularUnimodular {
    pub fn new(gamma: f64, c: C64) -> Self {
        Self { gamma, c }
    }

    pub fn matrix(&self) -> CMat {
        let q = C64::from_polar(1.0, 2.0 * PI * self.gamma);
        CMat::new(q, self.c, ZERO, q.conj())
    }
}

/// U A U^{-1} = (e^{i xi}, c; 0, e^{-i xi}) with U unitary of determinant one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchurForm {
    pub u: CMat,
    pub xi: C64,
    pub c: C64,
}

/// sin(pi x) with exact argument reduction.
pub fn sin_pi(x: f64) -> f64 {
    let mut r = x - 2.0 * (x / 2.0).round();
    if r > 0.5 {
        r = 1.0 - r;
    } else if r < -0.5 {
        r = -1.0 - r;
    }
    (PI * r).sin()
}

/// x - sin x without cancellation for small x.
fn x_minus_sin(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let x2 = x * x;
        x * x2
            * (1.0 / 6.0
                - x2 * (1.0 / 120.0
                    - x2 * (1.0 / 5040.0 - x2 * (1.0 / 362880.0 - x2 * (1.0 / 39916800.0 - x2 / 6227020800.0)))))
    } else {
        x - x.sin()
    }
}

/// 1 - sin(k y)/(k sin y) for |y| <= pi/2.
fn one_minus_dirichlet(k: f64, y: f64) -> f64 {
    (x_minus_sin(k * y) - k * x_minus_sin(y)) / (k * y.sin())
}

/// Splits 4 pi gamma = y0 + m pi with |y0| <= pi/2; returns (y0, m odd).
fn reduce_4gamma(gamma: f64) -> (f64, bool) {
    let t = 4.0 * gamma;
    let m = t.round();
    (PI * (t - m), (m as i64).rem_euclid(2) == 1)
}

/// X_k = sum_{j=1}^k (T^{2j-1})^* T^{2j-1} evaluated in O(1).
pub fn closed_form_xk(t: &TriangularUnimodular, k: usize) -> CMat {
    let kf = k as f64;
    let c2 = t.c.norm_sqr();
    let qbar = C64::from_polar(1.0, -2.0 * PI * t.gamma);
    let (y0, odd) = reduce_4gamma(t.gamma);
    let (x1, x2) = if y0.sin().abs() < 1e-12 {
        if odd {
            (t.c * qbar * kf, kf * (1.0 + c2))
        } else {
            (t.c * qbar * kf * kf, kf + c2 * kf * (4.0 * kf * kf - 1.0) / 3.0)
        }
    } else {
        // D = sin(2k y)/(2k sin y) with y = 4 pi gamma; the shift by m pi flips its sign when m is odd.
        let one_minus_d = if odd {
            2.0 - one_minus_dirichlet(2.0 * kf, y0)
        } else {
            one_minus_dirichlet(2.0 * kf, y0)
        };
        let sin_a = sin_pi(2.0 * t.gamma);
        let sin_y = if odd { -y0.sin() } else { y0.sin() };
        let s2 = (kf * y0).sin().powi(2);
        let x2 = kf + c2 * kf * one_minus_d / (2.0 * sin_a * sin_a);
        let num = C64::new(kf * one_minus_d, s2 / sin_y);
        let x1 = t.c * num / C64::new(0.0, 2.0 * sin_a);
        (x1, x2)
    };
    CMat::new(C64::new(kf, 0.0), x1, x1.conj(), C64::new(x2, 0.0))
}

/// k^2 (1 + |c|^2/|e^{-4 pi i gamma} - 1|^2 (1 - (sin 4 pi k gamma/(k sin 4 pi gamma))^2)).
pub fn det_xk_closed(t: &TriangularUnimodular, k: usize) -> f64 {
    let kf = k as f64;
    let c2 = t.c.norm_sqr();
    let (y0, odd) = reduce_4gamma(t.gamma);
    let sin_a = sin_pi(2.0 * t.gamma);
    if y0.sin().abs() < 1e-12 {
        return if odd { kf * kf } else { kf * kf * (1.0 + c2 * (kf * kf - 1.0) / 3.0) };
    }
    let om = one_minus_dirichlet(kf, y0);
    let factor = om * (2.0 - om);
    kf * kf * (1.0 + c2 * factor / (4.0 * sin_a * sin_a))
}

/// Certified two-case bounds on X_k.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XkBounds {
    pub lower: f64,
    pub upper: f64,
    pub smallest_singular_value: f64,
    pub norm: f64,
}

/// Lower bound k/1600 on the smallest singular value and upper bound 800 k (1 + k^2 |c|^2)
/// on the norm of X_k; a violation means a formula bug.
pub fn xk_two_case_bounds(t: &TriangularUnimodular, k: usize) -> Result<XkBounds> {
    let kf = k as f64;
    let (smax, smin) = mat2::singular_values(&closed_form_xk(t, k));
    let lower = kf / 1600.0;
    let upper = 800.0 * kf * (1.0 + kf * kf * t.c.norm_sqr());
    if smin < lower || smax > upper {
        return Err(Error::Bound(format!(
            "X_k bounds fail for gamma={}, c={}, k={k}: smin={smin}, norm={smax}",
            t.gamma, t.c
        )));
    }
    Ok(XkBounds { lower, upper, smallest_singular_value: smin, norm: smax })
}

/// Largest allowed perturbation (1/100) k^{-2} (1 + 2|c|k)^{-2}.
pub fn perturbation_threshold(t: &TriangularUnimodular, k: usize) -> f64 {
    let kf = k as f64;
    0.01 / (kf * kf * (1.0 + 2.0 * t.c.norm() * kf).powi(2))
}

/// max over the theta grid of ||X~_k(theta) - X_k|| where X~_k sums the odd iterates of
/// the perturbed cocycle; asserts the value is at most 1.
pub fn perturbed_sum_bound<C: CocycleMap + ?Sized>(
    t: &TriangularUnimodular,
    t_tilde: &C,
    k: usize,
    grid: usize,
) -> Result<f64> {
    let d = t_tilde.alpha().d();
    let thetas = tensor_grid(d, grid);
    let tm = t.matrix();
    let dev = thetas
        .iter()
        .map(|th| mat2::op_norm(&(t_tilde.matrix(th) - tm)))
        .fold(0.0, f64::max);
    let limit = perturbation_threshold(t, k);
    let slack = 4.0 * f64::EPSILON * mat2::op_norm(&tm);
    if dev > limit + slack {
        return Err(Error::Hypothesis(format!("||T~ - T||_0 = {dev:e} exceeds {limit:e}")));
    }
    let xk = closed_form_xk(t, k);
    let alpha = t_tilde.alpha();
    let mut worst = 0.0f64;
    for th in &thetas {
        let mut prod = t_tilde.matrix(th);
        let mut sum = prod.adjoint() * prod;
        for j in 2..=k {
            let m = 2 * j - 1;
            prod = t_tilde.matrix(&alpha.shift(th, (m - 1) as f64))
                * t_tilde.matrix(&alpha.shift(th, (m - 2) as f64))
                * prod;
            sum += prod.adjoint() * prod;
        }
        worst = worst.max(mat2::op_norm(&(sum - xk)));
    }
    if worst > 1.0 {
        return Err(Error::Bound(format!("||X~_k - X_k||_0 = {worst} > 1")));
    }
    Ok(worst)
}

/// Odd-power sum along the orbit: sum_{j=1}^k A_{2j-1}(theta)^* A_{2j-1}(theta).
pub fn orbit_odd_sum<C: CocycleMap + ?Sized>(c: &C, k: usize, theta: &[f64]) -> CMat {
    let alpha = c.alpha();
    let mut prod = iterate(c, 1, theta);
    let mut sum = prod.adjoint() * prod;
    for j in 2..=k {
        let m = 2 * j - 1;
        prod = c.matrix(&alpha.shift(theta, (m - 1) as f64)) * c.matrix(&alpha.shift(theta, (m - 2) as f64)) * prod;
        sum += prod.adjoint() * prod;
    }
    sum
}

pub(crate) fn tensor_grid(d: usize, grid: usize) -> Vec<Vec<f64>> {
    let total = grid.pow(d as u32);
    (0..total)
        .map(|idx| {
            let mut rest = idx;
            let mut th = vec![0.0; d];
            for t in th.iter_mut().rev() {
                *t = (rest % grid) as f64 / grid as f64;
                rest /= grid;
            }
            th
        })
        .collect()
}

/// Unitary Schur form of a real determinant-one matrix. e^{i xi} is the eigenvalue of
/// modulus >= 1; for elliptic A it is the one with argument in (0, pi].
pub fn triangularize(a: &RMat) -> SchurForm {
    let t = (a[(0, 0)] + a[(1, 1)]) / 2.0;
    let (lambda, xi) = if t.abs() < 1.0 {
        let xi = t.acos();
        (C64::from_polar(1.0, xi), C64::new(xi, 0.0))
    } else {
        let r = (t * t - 1.0).max(0.0).sqrt();
        let l = if t >= 0.0 { t + r } else { t - r };
        let xi = if l > 0.0 { C64::new(0.0, -l.ln()) } else { C64::new(PI, -(-l).ln()) };
        (C64::new(l, 0.0), xi)
    };
    let ac = mat2::complexify(a);
    let (p, q, r, s) = (ac[(0, 0)], ac[(0, 1)], ac[(1, 0)], ac[(1, 1)]);
    let mut v = if q.norm() >= r.norm() && q.norm() > 0.0 {
        [q, lambda - p]
    } else if r.norm() > 0.0 {
        [lambda - s, r]
    } else if (p - lambda).norm() <= (s - lambda).norm() {
        [ONE, ZERO]
    } else {
        [ZERO, ONE]
    };
    let nv = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    v[0] /= nv;
    v[1] /= nv;
    let uinv = CMat::new(v[0], -v[1].conj(), v[1], v[0].conj());
    let u = uinv.adjoint();
    let m = u * ac * uinv;
    SchurForm { u, xi, c: m[(0, 1)] }
}
