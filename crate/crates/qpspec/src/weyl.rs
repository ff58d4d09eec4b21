//! Odd-step accumulator P_k(E), its scale eps_k, and truncated-operator oracles for the
//! spectral measure of delta_0 + delta_1, the Borel transform M(z) and the half-line
//! m-functions.

use crate::cocycle::{CocycleMap, SchrodingerCocycle};
use crate::error::{Error, Result};
use crate::format::ser_f17;
use crate::mat2::{self, CMat, RMat, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io;

/// 4(5 + sqrt 24), the constant of the Borel-transform bound.
pub const CHAIN_CONSTANT: f64 = 4.0 * (5.0 + 4.898_979_485_566_356);

/// Running sum P_k = sum_{j=1}^k A_{2j-1}^* A_{2j-1} along the orbit of theta.
#[derive(Clone, Debug)]
pub struct WeylAccumulator {
    pub k: usize,
    pub p: CMat,
    pub det_p: f64,
    pub eps_k: f64,
    pub energy: f64,
    pub theta: Vec<f64>,
    p_real: RMat,
    odd: RMat,
}

impl WeylAccumulator {
    /// k = 1: P = S(theta)^* S(theta).
    pub fn start(sc: &SchrodingerCocycle, theta: &[f64]) -> Self {
        let a = sc.real_matrix(theta);
        let p_real = a.transpose() * a;
        let det_p = p_real.determinant().max(1.0);
        Self {
            k: 1,
            p: mat2::complexify(&p_real),
            det_p,
            eps_k: (0.25 / det_p).sqrt(),
            energy: sc.energy,
            theta: theta.to_vec(),
            p_real,
            odd: a,
        }
    }

    /// One rank-two update: A_{2k+1} = S(theta + 2k alpha) S(theta + (2k-1) alpha) A_{2k-1}.
    pub fn advance(&mut self, sc: &SchrodingerCocycle) -> Result<()> {
        let alpha = sc.alpha();
        let step = 2 * self.k;
        let s1 = sc.real_matrix(&alpha.shift(&self.theta, (step - 1) as f64));
        let s2 = sc.real_matrix(&alpha.shift(&self.theta, step as f64));
        self.odd = s2 * s1 * self.odd;
        self.p_real += self.odd.transpose() * self.odd;
        self.p_real[(0, 1)] = 0.5 * (self.p_real[(0, 1)] + self.p_real[(1, 0)]);
        self.p_real[(1, 0)] = self.p_real[(0, 1)];
        self.k += 1;
        let norm = mat2::op_norm_real(&self.p_real);
        if !norm.is_finite() || norm > 1e300 {
            return Err(Error::Saturated { k: self.k, norm });
        }
        // det(P + M) >= (sqrt det P + 1)^2 for positive M with det M = 1.
        let floor = (self.det_p.sqrt() + 1.0).powi(2);
        self.det_p = self.p_real.determinant().max(floor * (1.0 - 1e-12));
        self.eps_k = (0.25 / self.det_p).sqrt();
        self.p = mat2::complexify(&self.p_real);
        Ok(())
    }

    pub fn p_norm(&self) -> f64 {
        mat2::op_norm_real(&self.p_real)
    }

    /// ||P^{-1}|| = 1 / smallest eigenvalue.
    pub fn p_inv_norm(&self) -> f64 {
        let tr = self.p_real.trace();
        let big = self.p_norm();
        let small = self.det_p / big;
        debug_assert!(small <= tr);
        1.0 / small
    }

    pub fn p_real(&self) -> &RMat {
        &self.p_real
    }
}

impl Serialize for WeylAccumulator {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct MatDoc {
            re: [[f64; 2]; 2],
            im: [[f64; 2]; 2],
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            k: usize,
            #[serde(rename = "P")]
            p: MatDoc,
            #[serde(rename = "det_P")]
            det_p: f64,
            eps_k: f64,
            energy: f64,
            theta: &'a [f64],
        }
        let c = &self.p;
        Doc {
            k: self.k,
            p: MatDoc {
                re: [[c[(0, 0)].re, c[(0, 1)].re], [c[(1, 0)].re, c[(1, 1)].re]],
                im: [[c[(0, 0)].im, c[(0, 1)].im], [c[(1, 0)].im, c[(1, 1)].im]],
            },
            det_p: self.det_p,
            eps_k: self.eps_k,
            energy: self.energy,
            theta: &self.theta,
        }
        .serialize(ser)
    }
}

/// P_k(E) at phase theta.
pub fn accumulate_pk(sc: &SchrodingerCocycle, theta: &[f64], k: usize) -> Result<WeylAccumulator> {
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    let mut acc = WeylAccumulator::start(sc, theta);
    while acc.k < k {
        acc.advance(sc)?;
    }
    Ok(acc)
}

/// min over beta in [0, pi/2) (grid search, then a local polish) of ||u^beta||^2 ||u^{beta + pi/2}||^2, where u^beta
/// starts from (u_1, u_0) = (cos beta, -sin beta) and the norm sums n = 1..2k.
pub fn det_via_solutions(sc: &SchrodingerCocycle, theta: &[f64], k: usize, beta_grid: usize) -> f64 {
    let alpha = sc.alpha();
    let steps = 2 * k;
    let diag: Vec<f64> = (0..steps.saturating_sub(1))
        .map(|m| sc.energy - sc.potential(&alpha.shift(theta, m as f64)))
        .collect();
    let norm2 = |beta: f64| {
        let (s, c) = beta.sin_cos();
        let (mut cur, mut prev) = (c, -s);
        let mut sum = cur * cur;
        for d in &diag {
            let next = d * cur - prev;
            prev = cur;
            cur = next;
            sum += cur * cur;
        }
        sum
    };
    let product = |beta: f64| norm2(beta) * norm2(beta + 0.5 * PI);
    let grid = beta_grid.max(1);
    let h = 0.5 * PI / grid as f64;
    let (best, value) = (0..grid)
        .map(|i| (i as f64 * h, product(i as f64 * h)))
        .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    // golden-section polish inside the neighbouring grid cells
    let (mut a, mut b) = (best - h, best + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
    let (mut f1, mut f2) = (product(x1), product(x2));
    for _ in 0..60 {
        if f1 < f2 {
            b = x2;
            (x2, f2) = (x1, f1);
            x1 = b - g * (b - a);
            f1 = product(x1);
        } else {
            a = x1;
            (x1, f1) = (x2, f2);
            x2 = a + g * (b - a);
            f2 = product(x2);
        }
    }
    value.min(f1).min(f2)
}

/// Boundary condition of the truncated operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Dirichlet,
}

/// H restricted to sites -L..L with Dirichlet boundary conditions.
#[derive(Clone, Debug)]
pub struct TruncatedOperator {
    pub l: usize,
    /// lambda V(theta + n alpha) for n = -L..L.
    pub diagonal: Vec<f64>,
    pub boundary: Boundary,
}

/// An eigenvalue of the truncated operator with |v(0)|^2 + |v(1)|^2 for its normalized
/// eigenvector (summed over a cluster when eigenvalues are numerically degenerate).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    pub energy: f64,
    pub weight: f64,
    pub multiplicity: usize,
}

struct Shot {
    a: [f64; 2],
    left_sum: f64,
    b: [f64; 2],
    right_sum: f64,
}

const RESCALE: f64 = 1e120;

impl TruncatedOperator {
    pub fn new(sc: &SchrodingerCocycle, theta: &[f64], l: usize) -> Self {
        let alpha = sc.alpha();
        let diagonal = (0..=2 * l)
            .map(|i| sc.potential(&alpha.shift(theta, i as f64 - l as f64)))
            .collect();
        Self { l, diagonal, boundary: Boundary::Dirichlet }
    }

    pub fn from_diagonal(diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.len() % 2 == 0 || diagonal.len() < 3 {
            return Err(Error::Invalid("diagonal length must be odd and at least 3".into()));
        }
        Ok(Self { l: diagonal.len() / 2, diagonal, boundary: Boundary::Dirichlet })
    }

    pub fn free(l: usize) -> Self {
        Self { l, diagonal: vec![0.0; 2 * l + 1], boundary: Boundary::Dirichlet }
    }

    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    /// Potential at site n.
    pub fn site(&self, n: i64) -> f64 {
        self.diagonal[(n + self.l as i64) as usize]
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        let lo = self.diagonal.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.diagonal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo - 2.0, hi + 2.0)
    }

    /// Number of eigenvalues strictly below x (Sturm sequence).
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = f64::MIN_POSITIVE * 1e10;
        let mut count = 0;
        let mut q = 1.0;
        for (i, d) in self.diagonal.iter().enumerate() {
            q = if i == 0 { d - x } else { d - x - 1.0 / q };
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn shoot(&self, x: f64) -> Shot {
        let l = self.l;
        let (mut prev, mut cur, mut left_sum) = (0.0f64, 1.0f64, 0.0f64);
        for d in &self.diagonal[..=l] {
            left_sum += cur * cur;
            let next = (x - d) * cur - prev;
            prev = cur;
            cur = next;
            if cur.abs() > RESCALE {
                prev /= RESCALE;
                cur /= RESCALE;
                left_sum /= RESCALE * RESCALE;
            }
        }
        let a = [prev, cur];
        let (mut next, mut cur, mut right_sum) = (0.0f64, 1.0f64, 0.0f64);
        for d in self.diagonal[l + 1..].iter().rev() {
            right_sum += cur * cur;
            let prev = (x - d) * cur - next;
            next = cur;
            cur = prev;
            if cur.abs() > RESCALE {
                next /= RESCALE;
                cur /= RESCALE;
                right_sum /= RESCALE * RESCALE;
            }
        }
        Shot { a, left_sum, b: [cur, next], right_sum }
    }

    /// Normalized angle between the left and right shooting data at sites (0, 1);
    /// vanishes exactly at eigenvalues.
    fn mismatch(&self, x: f64) -> f64 {
        let s = self.shoot(x);
        let na = s.a[0].hypot(s.a[1]);
        let nb = s.b[0].hypot(s.b[1]);
        (s.a[1] * s.b[0] - s.a[0] * s.b[1]) / (na * nb)
    }

    fn weight_at(&self, x: f64) -> f64 {
        let s = self.shoot(x);
        let sigma = (s.a[0] * s.b[0] + s.a[1] * s.b[1]) / (s.b[0] * s.b[0] + s.b[1] * s.b[1]);
        let num = s.a[0] * s.a[0] + sigma * sigma * s.b[1] * s.b[1];
        let den = s.left_sum + sigma * sigma * s.right_sum;
        (num / den).clamp(0.0, 1.0)
    }

    /// Weight of an unresolvable cluster: left and right solutions carried across the whole
    /// box, each normalized separately.
    fn cluster_weight(&self, x: f64) -> f64 {
        let full = |from_left: bool| {
            let mut vals = vec![0.0f64; self.len()];
            let n = self.len();
            let (mut prev, mut cur) = (0.0f64, 1.0f64);
            for step in 0..n {
                let i = if from_left { step } else { n - 1 - step };
                vals[i] = cur;
                let next = (x - self.diagonal[i]) * cur - prev;
                prev = cur;
                cur = next;
                if cur.abs() > RESCALE {
                    prev /= RESCALE;
                    cur /= RESCALE;
                    for v in vals.iter_mut() {
                        *v /= RESCALE;
                    }
                }
            }
            let total: f64 = vals.iter().map(|v| v * v).sum();
            let (v0, v1) = (vals[self.l], vals[self.l + 1]);
            (v0 * v0 + v1 * v1) / total
        };
        (full(true) + full(false)).min(2.0)
    }

    fn locate(&self, mut lo: f64, mut hi: f64) -> f64 {
        let (flo, fhi) = (self.mismatch(lo), self.mismatch(hi));
        if flo == 0.0 {
            return lo;
        }
        if fhi == 0.0 {
            return hi;
        }
        if flo.signum() != fhi.signum() {
            return brent(|x| self.mismatch(x), lo, hi, flo, fhi);
        }
        let target = self.count_below(lo) + 1;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvalues in [lo, hi) with their delta_0 + delta_1 weights.
    pub fn eigenpairs_in(&self, lo: f64, hi: f64) -> Vec<Eigenpair> {
        let mut out = Vec::new();
        if hi <= lo {
            return out;
        }
        let mut stack = vec![(lo, hi, self.count_below(lo), self.count_below(hi))];
        while let Some((a, b, ca, cb)) = stack.pop() {
            let count = cb.saturating_sub(ca);
            if count == 0 {
                continue;
            }
            let width = b - a;
            if count == 1 {
                let x = self.locate(a, b);
                out.push(Eigenpair { energy: x, weight: self.weight_at(x), multiplicity: 1 });
                continue;
            }
            if width <= 1e-13 * a.abs().max(1.0) {
                let x = 0.5 * (a + b);
                out.push(Eigenpair { energy: x, weight: self.cluster_weight(x), multiplicity: count });
                continue;
            }
            let mid = 0.5 * (a + b);
            let cm = self.count_below(mid);
            stack.push((mid, b, cm, cb));
            stack.push((a, mid, ca, cm));
        }
        out.sort_by(|x, y| x.energy.total_cmp(&y.energy));
        out
    }

    /// All eigenpairs.
    pub fn eigenpairs(&self) -> Vec<Eigenpair> {
        let (lo, hi) = self.spectrum_bounds();
        self.eigenpairs_in(lo - 1e-9, hi + 1e-9)
    }

    /// Solves (H - z) x = e_site and returns x at that site.
    fn green_diagonal(&self, z: C64, site: usize) -> C64 {
        let n = self.len();
        let mut cp = vec![C64::new(0.0, 0.0); n];
        let mut dp = vec![C64::new(0.0, 0.0); n];
        let one = C64::new(1.0, 0.0);
        for i in 0..n {
            let rhs = if i == site { one } else { C64::new(0.0, 0.0) };
            let b = C64::new(self.diagonal[i], 0.0) - z;
            if i == 0 {
                cp[0] = one / b;
                dp[0] = rhs / b;
            } else {
                let denom = b - cp[i - 1];
                cp[i] = one / denom;
                dp[i] = (rhs - dp[i - 1]) / denom;
            }
        }
        let mut x = dp[n - 1];
        for i in (site..n - 1).rev() {
            x = dp[i] - cp[i] * x;
        }
        x
    }
}

/// Brent's method on a bracketing interval.
fn brent(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> f64 {
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb == 0.0 {
            return b;
        }
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 1e-300;
        let m = 0.5 * (c - b);
        if m.abs() <= tol {
            return b;
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol * m.signum() };
        fb = f(b);
    }
    b
}

/// mu(a, b) from a truncated operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasureEstimate {
    pub interval: (f64, f64),
    pub mass: f64,
    #[serde(rename = "L")]
    pub l: usize,
    /// Eigenvalues inside the interval.
    pub richness: usize,
    /// Eigenvalues that received half weight for sitting next to an endpoint.
    pub edge_count: usize,
    /// Clusters too tight to resolve.
    pub clusters: usize,
}

impl SpectralMeasureEstimate {
    pub fn edge_flagged(&self) -> bool {
        self.edge_count > 0
    }
}

/// Width of the endpoint window: min(10/L, (b-a)/20).
pub fn edge_window(l: usize, a: f64, b: f64) -> f64 {
    (10.0 / l as f64).min((b - a) / 20.0)
}

/// Sum of |v(0)|^2 + |v(1)|^2 over eigenpairs in (a, b); eigenvalues within the endpoint
/// window (on either side) count with half weight.
pub fn spectral_measure(op: &TruncatedOperator, interval: (f64, f64)) -> SpectralMeasureEstimate {
    let (a, b) = interval;
    let delta = edge_window(op.l, a, b).max(0.0);
    let mut mass = 0.0;
    let mut richness = 0;
    let mut edge_count = 0;
    let mut clusters = 0;
    for p in op.eigenpairs_in(a - delta, b + delta) {
        let inside = p.energy > a && p.energy < b;
        if inside {
            richness += p.multiplicity;
        }
        if p.multiplicity > 1 {
            clusters += 1;
        }
        if (p.energy - a).abs() < delta || (p.energy - b).abs() < delta {
            edge_count += p.multiplicity;
            mass += 0.5 * p.weight;
        } else if inside {
            mass += p.weight;
        }
    }
    SpectralMeasureEstimate { interval, mass: mass.clamp(0.0, 2.0), l: op.l, richness, edge_count, clusters }
}

/// M(z) = <delta_0, (H - z)^{-1} delta_0> + <delta_1, (H - z)^{-1} delta_1>.
pub fn borel_transform(op: &TruncatedOperator, z: C64) -> Result<C64> {
    if z.im <= 0.0 {
        return Err(Error::Invalid("Borel transform needs Im z > 0".into()));
    }
    Ok(op.green_diagonal(z, op.l) + op.green_diagonal(z, op.l + 1))
}

/// (m+, m-) with m+- = -+ u+-(1)/u+-(0) for the solutions vanishing beyond +-L.
pub fn m_functions(op: &TruncatedOperator, z: C64) -> Result<(C64, C64)> {
    if z.im <= 0.0 {
        return Err(Error::Invalid("m-functions need Im z > 0".into()));
    }
    let l = op.l as i64;
    let one = C64::new(1.0, 0.0);
    let mut x = C64::new(0.0, 0.0);
    for n in (0..l).rev() {
        x = one / (z - op.site(n + 1) - x);
    }
    let m_plus = -x;
    let mut y = C64::new(0.0, 0.0);
    for n in (-l + 1)..=0 {
        y = one / (z - op.site(n - 1) - y);
    }
    let m_minus = z - op.site(0) - y;
    Ok((m_plus, m_minus))
}

/// (m+ m- - 1) / (m+ + m-).
pub fn borel_from_m(m_plus: C64, m_minus: C64) -> C64 {
    (m_plus * m_minus - 1.0) / (m_plus + m_minus)
}

/// The three terms mu(E - eps_k, E + eps_k) <= 2 eps_k Im M(E + i eps_k) <= C eps_k^2 ||P_k||.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub energy: f64,
    pub k: usize,
    pub eps_k: f64,
    pub mass: f64,
    pub bound_mid: f64,
    pub bound_right: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub left_holds: bool,
    pub right_holds: bool,
    /// Truncation too short to resolve the window (L eps_k < 10) or an endpoint eigenvalue.
    pub flagged: bool,
}

impl ChainReport {
    pub fn holds(&self) -> bool {
        self.left_holds && self.right_holds
    }

    pub fn row(&self) -> OracleRow {
        OracleRow {
            energy: self.energy,
            epsilon: self.eps_k,
            mass: self.mass,
            l: self.l,
            k: self.k,
            bound_mid: self.bound_mid,
            bound_right: self.bound_right,
        }
    }
}

/// Evaluates both inequalities at scale eps_k with 5% slack.
pub fn mass_bound_chain(sc: &SchrodingerCocycle, theta: &[f64], k: usize, l: usize) -> Result<ChainReport> {
    let acc = accumulate_pk(sc, theta, k)?;
    let op = TruncatedOperator::new(sc, theta, l);
    chain_at(&op, &acc)
}

/// Chain terms for an accumulator against a prebuilt operator at the same phase.
pub fn chain_at(op: &TruncatedOperator, acc: &WeylAccumulator) -> Result<ChainReport> {
    let e = acc.energy;
    let eps = acc.eps_k;
    let mu = spectral_measure(op, (e - eps, e + eps));
    let m = borel_transform(op, C64::new(e, eps))?;
    let bound_mid = 2.0 * eps * m.im;
    let bound_right = CHAIN_CONSTANT * eps * eps * acc.p_norm();
    Ok(ChainReport {
        energy: e,
        k: acc.k,
        eps_k: eps,
        mass: mu.mass,
        bound_mid,
        bound_right,
        l: op.l,
        left_holds: mu.mass <= 1.05 * bound_mid,
        right_holds: bound_mid <= 1.05 * bound_right,
        flagged: (op.l as f64) * eps < 10.0 || mu.edge_flagged(),
    })
}

/// CSV row: E, epsilon, mass, L, k, bound_mid, bound_right.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleRow {
    #[serde(rename = "E", serialize_with = "ser_f17")]
    pub energy: f64,
    #[serde(serialize_with = "ser_f17")]
    pub epsilon: f64,
    #[serde(serialize_with = "ser_f17")]
    pub mass: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub k: usize,
    #[serde(serialize_with = "ser_f17")]
    pub bound_mid: f64,
    #[serde(serialize_with = "ser_f17")]
    pub bound_right: f64,
}

pub fn write_oracle_csv<W: io::Write>(rows: &[OracleRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
