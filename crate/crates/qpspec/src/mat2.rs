//! Small dense 2x2 helpers shared by every module.

use nalgebra::Matrix2;
use num_complex::Complex64;
use std::f64::consts::PI;

pub type C64 = Complex64;
pub type CMat = Matrix2<C64>;
pub type RMat = Matrix2<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn complexify(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn real_part(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

pub fn det(m: &CMat) -> C64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// Largest and smallest singular values.
pub fn singular_values(m: &CMat) -> (f64, f64) {
    let f2: f64 = m.iter().map(|z| z.norm_sqr()).sum();
    let d = det(m).norm();
    let disc = (f2 * f2 - 4.0 * d * d).max(0.0).sqrt();
    let smax = ((f2 + disc) / 2.0).sqrt();
    let smin = if smax > 0.0 { d / smax } else { 0.0 };
    (smax, smin)
}

pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).0
}

pub fn op_norm_real(m: &RMat) -> f64 {
    let f2 = m.iter().map(|x| x * x).sum::<f64>();
    let d = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).abs();
    let disc = (f2 * f2 - 4.0 * d * d).max(0.0).sqrt();
    ((f2 + disc) / 2.0).sqrt()
}

/// Inverse of a determinant-one matrix via the adjugate.
pub fn sl2_inv(m: &CMat) -> CMat {
    CMat::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)])
}

pub fn sl2_inv_real(m: &RMat) -> RMat {
    RMat::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)])
}

/// Rotation by the angle 2*pi*t.
pub fn rotation(t: f64) -> RMat {
    let (s, c) = (2.0 * PI * t).sin_cos();
    RMat::new(c, -s, s, c)
}

fn cosh_sinhc(s2: C64) -> (C64, C64) {
    if s2.norm() < 1e-4 {
        let ch = ONE + s2 / 2.0 + s2 * s2 / 24.0 + s2 * s2 * s2 / 720.0 + s2.powi(4) / 40320.0;
        let sc = ONE + s2 / 6.0 + s2 * s2 / 120.0 + s2 * s2 * s2 / 5040.0 + s2.powi(4) / 362880.0;
        (ch, sc)
    } else {
        let s = s2.sqrt();
        (s.cosh(), s.sinh() / s)
    }
}

/// Exponential of a trace-free matrix: cosh(s) I + sinh(s)/s X with s^2 = -det X.
pub fn exp_traceless(x: &CMat) -> CMat {
    let (ch, sc) = cosh_sinhc(-det(x));
    CMat::identity() * ch + x * sc
}

/// Matrix exponential of an arbitrary 2x2 matrix.
pub fn expm(x: &CMat) -> CMat {
    let half = (x[(0, 0)] + x[(1, 1)]) / 2.0;
    exp_traceless(&(x - CMat::identity() * half)) * half.exp()
}

/// Principal logarithm of a determinant-one matrix away from -I.
pub fn log_sl2(m: &CMat) -> CMat {
    let t = (m[(0, 0)] + m[(1, 1)]) / 2.0;
    let q = (t - ONE) * (t + ONE);
    let factor = if q.norm() < 1e-4 {
        ONE - q / 6.0 + q * q * 3.0 / 40.0 - q * q * q * 5.0 / 112.0 + q.powi(4) * 35.0 / 1152.0
    } else {
        let r = q.sqrt();
        (t + r).ln() / r
    };
    (m - CMat::identity() * t) * factor
}

/// Coordinates of a trace-free matrix in the basis H = diag(1,-1), E = e12, F = e21.
pub fn sl2_coords(x: &CMat) -> [C64; 3] {
    [(x[(0, 0)] - x[(1, 1)]) / 2.0, x[(0, 1)], x[(1, 0)]]
}

pub fn sl2_from_coords(c: &[C64; 3]) -> CMat {
    CMat::new(c[0], c[1], c[2], -c[0])
}

/// Matrix of X -> M X M^{-1} acting on sl2 coordinates (columns are images of H, E, F).
pub fn adjoint_matrix(m: &CMat) -> [[C64; 3]; 3] {
    let inv = sl2_inv(m);
    let basis = [
        CMat::new(ONE, ZERO, ZERO, -ONE),
        CMat::new(ZERO, ONE, ZERO, ZERO),
        CMat::new(ZERO, ZERO, ONE, ZERO),
    ];
    let mut out = [[ZERO; 3]; 3];
    for (col, b) in basis.iter().enumerate() {
        let img = sl2_coords(&(m * b * inv));
        for row in 0..3 {
            out[row][col] = img[row];
        }
    }
    out
}

/// Solves a 3x3 complex system by Gaussian elimination with partial pivoting.
/// Returns the solution and the smallest pivot modulus.
pub fn solve3(a: &[[C64; 3]; 3], b: &[C64; 3]) -> ([C64; 3], f64) {
    let mut m = *a;
    let mut r = *b;
    let mut min_pivot = f64::INFINITY;
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| m[i][col].norm().total_cmp(&m[j][col].norm()))
            .unwrap();
        m.swap(col, piv);
        r.swap(col, piv);
        let p = m[col][col];
        min_pivot = min_pivot.min(p.norm());
        if p.norm() == 0.0 {
            return ([ZERO; 3], 0.0);
        }
        for row in col + 1..3 {
            let f = m[row][col] / p;
            for k in col..3 {
                let v = m[col][k];
                m[row][k] -= f * v;
            }
            let v = r[col];
            r[row] -= f * v;
        }
    }
    let mut x = [ZERO; 3];
    for row in (0..3).rev() {
        let mut s = r[row];
        for k in row + 1..3 {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    (x, min_pivot)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &CMat, b: &CMat, tol: f64) -> bool {
        (a - b).iter().all(|z| z.norm() < tol)
    }

    #[test]
    fn exp_matches_power_series() {
        let x = CMat::new(
            C64::new(0.3, 0.1),
            C64::new(-0.7, 0.2),
            C64::new(0.4, 0.0),
            C64::new(-0.3, -0.1),
        );
        let mut term = CMat::identity();
        let mut sum = CMat::identity();
        for k in 1..40 {
            term = term * x / C64::new(k as f64, 0.0);
            sum += term;
        }
        assert!(close(&exp_traceless(&x), &sum, 1e-14));
    }

    #[test]
    fn log_inverts_exp_near_identity() {
        for scale in [1e-9, 1e-5, 1e-2, 0.3] {
            let x = CMat::new(
                C64::new(0.2 * scale, 0.0),
                C64::new(-0.5 * scale, 0.0),
                C64::new(0.9 * scale, 0.0),
                C64::new(-0.2 * scale, 0.0),
            );
            let back = log_sl2(&exp_traceless(&x));
            assert!(close(&back, &x, 1e-15 + 1e-13 * scale), "scale {scale}");
        }
    }

    #[test]
    fn singular_values_of_diagonal() {
        let m = complexify(&RMat::new(2.0, 0.0, 0.0, 0.5));
        let (a, b) = singular_values(&m);
        assert!((a - 2.0).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
    }

    #[test]
    fn adjoint_of_identity_is_identity() {
        let ad = adjoint_matrix(&CMat::identity());
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((ad[i][j] - C64::new(e, 0.0)).norm() < 1e-15);
            }
        }
    }
}
