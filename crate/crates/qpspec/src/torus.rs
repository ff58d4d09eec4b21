//! Finite Fourier series on the d-torus with values in 2x2 complex matrices,
//! strip norms, and Diophantine checks for frequency vectors.

use crate::error::{Error, Result};
use crate::mat2::{self, CMat, C64, ONE, ZERO};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Frequency vector alpha in [0,1)^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector {
    pub alpha: Vec<f64>,
}

impl FrequencyVector {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::Invalid("frequency vector needs d >= 1".into()));
        }
        if alpha.iter().any(|a| !a.is_finite() || *a < 0.0 || *a >= 1.0) {
            return Err(Error::Invalid(format!("frequencies must lie in [0,1): {alpha:?}")));
        }
        Ok(Self { alpha })
    }

    /// The golden mean (sqrt 5 - 1)/2.
    pub fn golden() -> Self {
        Self { alpha: vec![(5f64.sqrt() - 1.0) / 2.0] }
    }

    /// (sqrt 2 - 1, sqrt 3 - 1).
    pub fn two_frequency() -> Self {
        Self { alpha: vec![2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0] }
    }

    pub fn d(&self) -> usize {
        self.alpha.len()
    }

    /// <n, alpha>.
    pub fn dot(&self, n: &[i32]) -> f64 {
        n.iter().zip(&self.alpha).map(|(&k, a)| k as f64 * a).sum()
    }

    /// theta + m alpha without reduction mod 1.
    pub fn shift(&self, theta: &[f64], m: f64) -> Vec<f64> {
        theta.iter().zip(&self.alpha).map(|(t, a)| t + m * a).collect()
    }
}

/// Value class tag carried by a series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueClass {
    #[serde(rename = "real-scalar")]
    RealScalar,
    #[serde(rename = "sl2R")]
    Sl2R,
    #[serde(rename = "SL2R")]
    SL2R,
    #[serde(rename = "sl2C")]
    Sl2C,
    #[serde(rename = "SL2C")]
    SL2C,
}

impl ValueClass {
    pub fn is_real(self) -> bool {
        matches!(self, ValueClass::RealScalar | ValueClass::Sl2R | ValueClass::SL2R)
    }

    pub fn is_lie_algebra(self) -> bool {
        matches!(self, ValueClass::Sl2R | ValueClass::Sl2C)
    }
}

/// sup norm max_i |n_i|.
pub fn sup_norm(n: &[i32]) -> i32 {
    n.iter().map(|k| k.abs()).max().unwrap_or(0)
}

/// Euclidean norm of a lattice point.
pub fn euclid_norm(n: &[i32]) -> f64 {
    n.iter().map(|&k| (k as f64).powi(2)).sum::<f64>().sqrt()
}

/// Distance from x to the nearest integer.
pub fn dist_to_z(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Visits every lattice point with |n|_inf = s in lexicographic order.
pub fn for_each_in_shell(d: usize, s: i32, mut f: impl FnMut(&[i32]) -> bool) -> bool {
    let mut n = vec![-s; d];
    loop {
        if sup_norm(&n) == s && !f(&n) {
            return false;
        }
        let mut i = d;
        loop {
            if i == 0 {
                return true;
            }
            i -= 1;
            if n[i] < s {
                n[i] += 1;
                for m in n.iter_mut().skip(i + 1) {
                    *m = -s;
                }
                break;
            }
        }
    }
}

/// Finite Fourier series sum_n c_n e^{2 pi i <n, theta>} with 2x2 complex coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusSeries {
    d: usize,
    class: ValueClass,
    coeffs: BTreeMap<Vec<i32>, CMat>,
}

impl TorusSeries {
    pub fn zero(d: usize, class: ValueClass) -> Self {
        Self { d, class, coeffs: BTreeMap::new() }
    }

    pub fn constant(d: usize, m: CMat, class: ValueClass) -> Self {
        let mut s = Self::zero(d, class);
        s.insert(vec![0; d], m);
        s
    }

    /// Builds a series from (lattice point, coefficient) pairs; repeated points are summed.
    pub fn from_coeffs(
        d: usize,
        class: ValueClass,
        coeffs: impl IntoIterator<Item = (Vec<i32>, CMat)>,
    ) -> Result<Self> {
        let mut s = Self::zero(d, class);
        for (n, c) in coeffs {
            if n.len() != d {
                return Err(Error::Invalid(format!("lattice point {n:?} has wrong dimension")));
            }
            s.insert(n, c);
        }
        Ok(s)
    }

    /// Scalar series embedded as multiples of the identity.
    pub fn scalar(d: usize, coeffs: impl IntoIterator<Item = (Vec<i32>, C64)>) -> Result<Self> {
        Self::from_coeffs(
            d,
            ValueClass::RealScalar,
            coeffs.into_iter().map(|(n, c)| (n, CMat::identity() * c)),
        )
    }

    /// sum_i cos 2 pi theta_i.
    pub fn cos_sum(d: usize) -> Self {
        let mut s = Self::zero(d, ValueClass::RealScalar);
        for i in 0..d {
            for sign in [-1, 1] {
                let mut n = vec![0; d];
                n[i] = sign;
                s.insert(n, CMat::identity() * C64::new(0.5, 0.0));
            }
        }
        s
    }

    fn insert(&mut self, n: Vec<i32>, c: CMat) {
        let e = self.coeffs.entry(n).or_insert_with(CMat::zeros);
        *e += c;
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn value_class(&self) -> ValueClass {
        self.class
    }

    pub fn with_class(mut self, class: ValueClass) -> Self {
        self.class = class;
        self
    }

    pub fn coeffs(&self) -> &BTreeMap<Vec<i32>, CMat> {
        &self.coeffs
    }

    pub fn coeff(&self, n: &[i32]) -> CMat {
        self.coeffs.get(n).copied().unwrap_or_else(CMat::zeros)
    }

    /// Largest |n|_inf among stored coefficients.
    pub fn degree(&self) -> i32 {
        self.coeffs.keys().map(|n| sup_norm(n)).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().all(|c| c.iter().all(|z| *z == ZERO))
    }

    pub fn scale(&self, k: C64) -> Self {
        let mut s = self.clone();
        for c in s.coeffs.values_mut() {
            *c *= k;
        }
        s
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut s = self.clone();
        for (n, c) in &other.coeffs {
            s.insert(n.clone(), *c);
        }
        s
    }

    /// Pointwise matrix product, computed as a coefficient convolution.
    pub fn mul(&self, other: &Self) -> Self {
        let mut s = Self::zero(self.d, self.class);
        for (n, a) in &self.coeffs {
            for (m, b) in &other.coeffs {
                let k: Vec<i32> = n.iter().zip(m).map(|(x, y)| x + y).collect();
                s.insert(k, a * b);
            }
        }
        s
    }

    /// The sl2R series (0 0; lambda V 0) built from a scalar series V.
    pub fn lower_nilpotent(&self, lambda: f64) -> Self {
        let mut s = Self::zero(self.d, ValueClass::Sl2R);
        for (n, c) in &self.coeffs {
            let mut m = CMat::zeros();
            m[(1, 0)] = c[(0, 0)] * lambda;
            s.insert(n.clone(), m);
        }
        s
    }

    /// g(theta) = f(theta + shift), coefficientwise c_n e^{2 pi i <n, shift>}.
    pub fn translate(&self, shift: &[f64]) -> Self {
        let mut s = self.clone();
        for (n, c) in s.coeffs.iter_mut() {
            let phase: f64 = n.iter().zip(shift).map(|(&k, &x)| k as f64 * x).sum();
            *c *= C64::from_polar(1.0, 2.0 * PI * phase.rem_euclid(1.0));
        }
        s
    }

    /// Drops every coefficient with |n|_inf > n_max.
    pub fn truncate(&self, n_max: i32) -> Self {
        let mut s = self.clone();
        s.coeffs.retain(|n, _| sup_norm(n) <= n_max);
        s
    }

    /// sum_n c_n e^{2 pi i <n, theta + i imag>}.
    pub fn evaluate(&self, theta: &[f64], imag: &[f64]) -> CMat {
        let mut out = CMat::zeros();
        for (n, c) in &self.coeffs {
            let mut re = 0.0;
            let mut im = 0.0;
            for i in 0..self.d {
                let k = n[i] as f64;
                re += k * theta[i];
                im += k * imag.get(i).copied().unwrap_or(0.0);
            }
            let phase = C64::from_polar((-2.0 * PI * im).exp(), 2.0 * PI * (re - re.floor()));
            out += c * phase;
        }
        out
    }

    /// Scalar value (entry (0,0)) on the real torus.
    pub fn scalar_value(&self, theta: &[f64]) -> f64 {
        let mut out = 0.0;
        for (n, c) in &self.coeffs {
            let x: f64 = n.iter().zip(theta).map(|(&k, t)| k as f64 * t).sum();
            let z = c[(0, 0)];
            let (s, co) = (2.0 * PI * (x - x.floor())).sin_cos();
            out += z.re * co - z.im * s;
        }
        out
    }

    /// Values on the tensor grid theta = (k_1/m, ..., k_d/m) shifted by i*imag,
    /// flattened with the first coordinate varying slowest.
    pub fn eval_grid(&self, m: usize, imag: &[f64]) -> Vec<CMat> {
        let k = self.degree().max(0) as usize;
        let width = 2 * k + 1;
        let mut data = vec![CMat::zeros(); width.pow(self.d as u32)];
        for (n, c) in &self.coeffs {
            let mut idx = 0;
            for &x in n {
                idx = idx * width + (x + k as i32) as usize;
            }
            data[idx] += c;
        }
        let mut shape = vec![width; self.d];
        for axis in 0..self.d {
            let y = imag.get(axis).copied().unwrap_or(0.0);
            let mut kernel = Vec::with_capacity(m * width);
            for x in 0..m {
                for j in 0..width {
                    let nn = j as f64 - k as f64;
                    let frac = (nn * x as f64 / m as f64).rem_euclid(1.0);
                    kernel.push(C64::from_polar((-2.0 * PI * nn * y).exp(), 2.0 * PI * frac));
                }
            }
            data = contract_axis(&data, &mut shape, axis, &kernel, m);
        }
        data
    }

    /// Fourier coefficients |n|_inf <= max_degree of grid samples on the tensor grid of
    /// size m per axis; coefficients whose largest entry is below drop_tol are discarded.
    pub fn from_grid(
        d: usize,
        m: usize,
        values: &[CMat],
        max_degree: usize,
        drop_tol: f64,
        class: ValueClass,
    ) -> Self {
        assert_eq!(values.len(), m.pow(d as u32));
        let k = max_degree.min((m - 1) / 2);
        let width = 2 * k + 1;
        let mut shape = vec![m; d];
        let mut data = values.to_vec();
        let mut kernel = Vec::with_capacity(m * width);
        for j in 0..width {
            let nn = j as f64 - k as f64;
            for x in 0..m {
                let frac = (nn * x as f64 / m as f64).rem_euclid(1.0);
                kernel.push(C64::from_polar(1.0 / m as f64, -2.0 * PI * frac));
            }
        }
        for axis in 0..d {
            data = contract_axis(&data, &mut shape, axis, &kernel, width);
        }
        let mut s = Self::zero(d, class);
        for (idx, c) in data.into_iter().enumerate() {
            if c.iter().map(|z| z.norm()).fold(0.0, f64::max) < drop_tol {
                continue;
            }
            let mut n = vec![0; d];
            let mut rest = idx;
            for i in (0..d).rev() {
                n[i] = (rest % width) as i32 - k as i32;
                rest /= width;
            }
            s.coeffs.insert(n, c);
        }
        if class.is_real() {
            s = s.symmetrize();
        }
        s
    }

    /// Replaces c_n by (c_n + conj(c_{-n}))/2, enforcing real values on the real torus.
    pub fn symmetrize(&self) -> Self {
        let mut s = Self::zero(self.d, self.class);
        for (n, c) in &self.coeffs {
            let neg: Vec<i32> = n.iter().map(|x| -x).collect();
            let partner = self.coeff(&neg).map(|z| z.conj());
            s.coeffs.insert(n.clone(), (c + partner) * C64::new(0.5, 0.0));
            if !self.coeffs.contains_key(&neg) {
                s.coeffs.insert(neg, (partner + c.map(|z| z.conj())) * C64::new(0.5, 0.0));
            }
        }
        s
    }

    /// Sup over the sampled strip boundary of the operator norm: all 2^d sign patterns of
    /// the imaginary offset (+-r per coordinate) on a grid of `grid` points per axis.
    pub fn norm_r(&self, r: f64, grid: usize) -> f64 {
        if self.coeffs.is_empty() {
            return 0.0;
        }
        let patterns = if r == 0.0 { 1 } else { 1usize << self.d };
        let mut best = 0.0f64;
        for p in 0..patterns {
            let imag: Vec<f64> =
                (0..self.d).map(|i| if (p >> i) & 1 == 1 { -r } else { r }).collect();
            for v in self.eval_grid(grid, &imag) {
                best = best.max(mat2::op_norm(&v));
            }
        }
        best
    }

    /// Upper bound sum_n |c_n| e^{2 pi |n|_1 r} on the strip norm.
    pub fn coefficient_bound(&self, r: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(n, c)| {
                let l1: i32 = n.iter().map(|k| k.abs()).sum();
                mat2::op_norm(c) * (2.0 * PI * l1 as f64 * r).exp()
            })
            .sum()
    }

    /// Checks coeff(-n) = conj(coeff(n)) entrywise.
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|(n, c)| {
            let neg: Vec<i32> = n.iter().map(|x| -x).collect();
            let p = self.coeff(&neg);
            (0..4).all(|i| (c[i] - p[i].conj()).norm() <= tol)
        })
    }

    /// Validates the invariants attached to the value class.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.class.is_real() && !self.is_conjugate_symmetric(tol) {
            return Err(Error::Invalid("real class without conjugate-symmetric coefficients".into()));
        }
        if self.class.is_lie_algebra()
            && self.coeffs.values().any(|c| (c[(0, 0)] + c[(1, 1)]).norm() > tol)
        {
            return Err(Error::Invalid("sl2 class with non-trace-free coefficient".into()));
        }
        if matches!(self.class, ValueClass::SL2R | ValueClass::SL2C) {
            let m = 16;
            for v in self.eval_grid(m, &vec![0.0; self.d]) {
                if (mat2::det(&v) - ONE).norm() > 1e-10 {
                    return Err(Error::Invalid("SL(2) class with determinant != 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(crate::format::to_json17(&SeriesDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SeriesDoc = serde_json::from_str(text)?;
        let s = Self::try_from(doc)?;
        s.validate(1e-12)?;
        Ok(s)
    }
}

fn contract_axis(
    data: &[CMat],
    shape: &mut [usize],
    axis: usize,
    kernel: &[C64],
    out_len: usize,
) -> Vec<CMat> {
    let in_len = shape[axis];
    let pre: usize = shape[..axis].iter().product();
    let post: usize = shape[axis + 1..].iter().product();
    let mut out = vec![CMat::zeros(); pre * out_len * post];
    for p in 0..pre {
        for o in 0..out_len {
            let row = &kernel[o * in_len..(o + 1) * in_len];
            let start = (p * out_len + o) * post;
            let dst = &mut out[start..start + post];
            for (i, &w) in row.iter().enumerate() {
                let src_start = (p * in_len + i) * post;
                for (dv, sv) in dst.iter_mut().zip(&data[src_start..src_start + post]) {
                    *dv += sv * w;
                }
            }
        }
    }
    shape[axis] = out_len;
    out
}

#[derive(Serialize, Deserialize)]
struct CoeffDoc {
    n: Vec<i32>,
    re: [[f64; 2]; 2],
    im: [[f64; 2]; 2],
}

#[derive(Serialize, Deserialize)]
struct SeriesDoc {
    d: usize,
    value_class: ValueClass,
    coeffs: Vec<CoeffDoc>,
}

impl From<&TorusSeries> for SeriesDoc {
    fn from(s: &TorusSeries) -> Self {
        let coeffs = s
            .coeffs
            .iter()
            .map(|(n, c)| CoeffDoc {
                n: n.clone(),
                re: [[c[(0, 0)].re, c[(0, 1)].re], [c[(1, 0)].re, c[(1, 1)].re]],
                im: [[c[(0, 0)].im, c[(0, 1)].im], [c[(1, 0)].im, c[(1, 1)].im]],
            })
            .collect();
        SeriesDoc { d: s.d, value_class: s.class, coeffs }
    }
}

impl TryFrom<SeriesDoc> for TorusSeries {
    type Error = Error;

    fn try_from(doc: SeriesDoc) -> Result<Self> {
        TorusSeries::from_coeffs(
            doc.d,
            doc.value_class,
            doc.coeffs.into_iter().map(|c| {
                let z = |i: usize, j: usize| C64::new(c.re[i][j], c.im[i][j]);
                (c.n, CMat::new(z(0, 0), z(0, 1), z(1, 0), z(1, 1)))
            }),
        )
    }
}

impl Serialize for TorusSeries {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        SeriesDoc::from(self).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for TorusSeries {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let doc = SeriesDoc::deserialize(de)?;
        TorusSeries::try_from(doc).map_err(serde::de::Error::custom)
    }
}

/// Certificate that |<n,alpha>|_{R/Z} > kappa / |n|^tau for every 0 < |n|_inf <= N.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiophantineCertificate {
    pub kappa: f64,
    pub tau: f64,
    pub checked_radius: u32,
    pub worst_ratio: f64,
    pub worst_n: Vec<i32>,
}

/// Exhaustive Diophantine scan over the sup-norm box of radius n_check, shell by shell.
/// The weight |n| is the Euclidean length. The first violation in shell order is reported.
pub fn check_diophantine(
    alpha: &FrequencyVector,
    kappa: f64,
    tau: f64,
    n_check: u32,
) -> Result<DiophantineCertificate> {
    let d = alpha.d();
    if kappa <= 0.0 || tau <= d as f64 - 1.0 {
        return Err(Error::Invalid(format!("need kappa > 0 and tau > d - 1, got {kappa}, {tau}")));
    }
    let mut worst = f64::INFINITY;
    let mut worst_n = vec![0; d];
    let mut violation = None;
    for s in 1..=n_check as i32 {
        let done = for_each_in_shell(d, s, |n| {
            let divisor = dist_to_z(alpha.dot(n));
            let ratio = divisor * euclid_norm(n).powf(tau) / kappa;
            if ratio < worst {
                worst = ratio;
                worst_n = n.to_vec();
            }
            if ratio <= 1.0 {
                let sign = if n.iter().find(|&&k| k != 0).is_some_and(|&k| k < 0) { -1 } else { 1 };
                violation = Some((n.iter().map(|k| sign * k).collect(), divisor, ratio));
                return false;
            }
            true
        });
        if !done {
            break;
        }
    }
    if let Some((n, divisor, ratio)) = violation {
        return Err(Error::NotDiophantine { n, divisor, ratio });
    }
    Ok(DiophantineCertificate { kappa, tau, checked_radius: n_check, worst_ratio: worst, worst_n })
}

/// Pointwise exponential of an sl2-valued series re-expanded to degree order * degree(f).
/// Fails with `Error::Truncation` when the re-expansion misses the pointwise exponential
/// by more than 1e-12 on an offset check grid.
pub fn exp_sl2(f: &TorusSeries, order: usize) -> Result<TorusSeries> {
    if !f.value_class().is_lie_algebra() {
        return Err(Error::Invalid("exp_sl2 needs an sl2-valued series".into()));
    }
    let class = if f.value_class() == ValueClass::Sl2R { ValueClass::SL2R } else { ValueClass::SL2C };
    let d = f.d();
    if f.mul(f).coeffs().values().all(|c| c.iter().all(|z| *z == ZERO)) {
        return Ok(TorusSeries::constant(d, CMat::identity(), class).add(&f.clone().with_class(class)));
    }
    let target = (order.max(1) * f.degree().max(0) as usize).max(1);
    let m = (2 * target + 2).next_power_of_two().max(8);
    let values: Vec<CMat> =
        f.eval_grid(m, &vec![0.0; d]).iter().map(mat2::exp_traceless).collect();
    let out = TorusSeries::from_grid(d, m, &values, target, 0.0, class);
    let check_m = 2 * m + 1;
    let fine_f = f.eval_grid(check_m, &vec![0.0; d]);
    let fine_out = out.eval_grid(check_m, &vec![0.0; d]);
    let residual = fine_f
        .iter()
        .zip(&fine_out)
        .map(|(x, y)| mat2::op_norm(&(mat2::exp_traceless(x) - y)))
        .fold(0.0, f64::max);
    if residual > 1e-12 {
        return Err(Error::Truncation(residual));
    }
    Ok(out)
}
