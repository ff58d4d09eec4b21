//! Modulus-of-continuity pipeline: the eps -> k bracketing rule, the ||P_k|| ||P_k^{-1}||^3
//! ratio, per-row chain estimates and the square-root scan over an (E, eps) grid.

use crate::cocycle::SchrodingerCocycle;
use crate::error::{Error, Result};
use crate::format::ser_f17;
use crate::kam::{self, KamConfig};
use crate::mat2::{self, CMat};
use crate::torus::{check_diophantine, DiophantineCertificate, FrequencyVector, TorusSeries};
use crate::triangular::{closed_form_xk, triangularize, TriangularUnimodular};
use crate::weyl::{
    borel_transform, spectral_measure, TruncatedOperator, WeylAccumulator, CHAIN_CONSTANT,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io;
use std::path::{Path, PathBuf};

/// Potential given inline or as a path to a Fourier-series JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSource {
    Path(PathBuf),
    Inline(TorusSeries),
}

/// Rule choosing k for a given eps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KWindowPolicy {
    /// The k with eps_{k+1} < eps <= eps_k.
    Bracket,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiophantineSpec {
    pub kappa: f64,
    pub tau: f64,
    pub n_check: u32,
}

impl DiophantineSpec {
    /// Defaults per dimension: (0.25, 1.5, 10^4) for d = 1, (0.05, 2.5, 200) for d = 2.
    pub fn default_for(d: usize) -> Self {
        match d {
            1 => Self { kappa: 0.25, tau: 1.5, n_check: 10_000 },
            2 => Self { kappa: 0.05, tau: 2.5, n_check: 200 },
            _ => Self { kappa: 0.01, tau: d as f64 + 0.5, n_check: 30 },
        }
    }
}

fn default_gate() -> f64 {
    0.1
}

fn default_k_max() -> usize {
    1_000_000
}

fn default_policy() -> KWindowPolicy {
    KWindowPolicy::Bracket
}

/// Input of `holder_scan`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub potential: PotentialSource,
    pub lambda: f64,
    pub alpha: Vec<f64>,
    pub theta: Vec<f64>,
    #[serde(rename = "E_grid")]
    pub e_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    #[serde(rename = "L_oracle")]
    pub l_oracle: usize,
    #[serde(default = "default_policy")]
    pub k_window_policy: KWindowPolicy,
    #[serde(default = "default_gate")]
    pub lambda_gate: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default)]
    pub diophantine: Option<DiophantineSpec>,
    /// Directory against which a relative potential path is resolved.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// n log-spaced points from lo to hi inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

impl ScanConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn potential(&self) -> Result<TorusSeries> {
        match &self.potential {
            PotentialSource::Inline(v) => Ok(v.clone()),
            PotentialSource::Path(p) => {
                let full = match &self.base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p.clone(),
                };
                TorusSeries::from_json(&std::fs::read_to_string(full)?)
            }
        }
    }

    pub fn frequency(&self) -> Result<FrequencyVector> {
        FrequencyVector::new(self.alpha.clone())
    }

    /// Schrodinger cocycle at energy 0; rows move the energy.
    pub fn cocycle(&self) -> Result<SchrodingerCocycle> {
        SchrodingerCocycle::new(self.frequency()?, self.potential()?, self.lambda, 0.0)
    }

    /// Checks the grid, the gate and the frequency.
    pub fn validate(&self) -> Result<DiophantineCertificate> {
        let alpha = self.frequency()?;
        if self.theta.len() != alpha.d() {
            return Err(Error::Invalid("theta dimension differs from alpha".into()));
        }
        if self.lambda.abs() > self.lambda_gate {
            return Err(Error::Hypothesis(format!(
                "lambda = {} above the gate {}",
                self.lambda, self.lambda_gate
            )));
        }
        let lo = self.eps_grid.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.eps_grid.iter().copied().fold(0.0, f64::max);
        if !(lo > 0.0) || hi / lo < 1e3 * (1.0 - 1e-9) {
            return Err(Error::Invalid("eps_grid must be positive and span at least 3 decades".into()));
        }
        if self.e_grid.is_empty() {
            return Err(Error::Invalid("empty E_grid".into()));
        }
        let spec = self.diophantine.unwrap_or_else(|| DiophantineSpec::default_for(alpha.d()));
        check_diophantine(&alpha, spec.kappa, spec.tau, spec.n_check)
    }
}

/// The k with eps_{k+1} < eps <= eps_k, found by advancing P_k one rank update at a time
/// (det P_k is strictly increasing, so the first crossing is the bracket).
pub fn epsk_policy(sc: &SchrodingerCocycle, theta: &[f64], eps: f64, k_max: usize) -> Result<(usize, WeylAccumulator)> {
    let mut acc = WeylAccumulator::start(sc, theta);
    if eps > acc.eps_k {
        return Err(Error::NoBracket(1));
    }
    loop {
        if acc.k >= k_max {
            return Err(Error::NoBracket(k_max));
        }
        let mut next = acc.clone();
        next.advance(sc)?;
        if next.eps_k < eps {
            return Ok((acc.k, acc));
        }
        acc = next;
    }
}

/// E is in the spectrum when both the L and the L/2 truncations have an eigenvalue within 5/L.
pub fn in_spectrum(sc: &SchrodingerCocycle, theta: &[f64], e: f64, l: usize) -> bool {
    let window = 5.0 / l as f64;
    [l, l / 2].iter().all(|&size| {
        let op = TruncatedOperator::new(sc, theta, size);
        op.count_below(e + window) > op.count_below(e - window)
    })
}

/// Eigenvalue of the truncation nearest to e.
pub fn nearest_eigenvalue(op: &TruncatedOperator, e: f64) -> f64 {
    let mut w = 1.0 / op.len() as f64;
    loop {
        let pairs = op.eigenpairs_in(e - w, e + w);
        if let Some(p) = pairs.iter().min_by(|a, b| (a.energy - e).abs().total_cmp(&(b.energy - e).abs())) {
            return p.energy;
        }
        w *= 2.0;
    }
}

/// Smallest and largest eigenvalue of the truncation.
pub fn spectral_edges(op: &TruncatedOperator) -> (f64, f64) {
    let (lo, hi) = op.spectrum_bounds();
    let n = op.len();
    let locate = |target: usize| {
        let (mut a, mut b) = (lo - 1e-9, hi + 1e-9);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if op.count_below(mid) >= target {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };
    (locate(1), locate(n))
}

/// One (E, eps) row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    #[serde(rename = "E", serialize_with = "ser_f17")]
    pub energy: f64,
    #[serde(serialize_with = "ser_f17")]
    pub eps: f64,
    #[serde(serialize_with = "ser_f17")]
    pub mu_mass: f64,
    /// mu_mass / eps^{1/2}.
    #[serde(serialize_with = "ser_f17")]
    pub sqrt_bound_ratio: f64,
    pub k_used: usize,
    #[serde(serialize_with = "ser_f17")]
    pub eps_k: f64,
    #[serde(rename = "P_norm", serialize_with = "ser_f17")]
    pub p_norm: f64,
    /// 2 eps Im M(E + i eps).
    #[serde(serialize_with = "ser_f17")]
    pub bound_mid: f64,
    /// 4(5 + sqrt 24) eps_k^2 ||P_k||.
    #[serde(serialize_with = "ser_f17")]
    pub bound_right: f64,
    /// ||P_k|| eps_k^{3/2}.
    #[serde(serialize_with = "ser_f17")]
    pub p_constant: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub richness: usize,
    pub in_spectrum: bool,
    pub flagged: bool,
    pub chain_ok: bool,
    /// For out-of-spectrum E whose interval meets the spectrum: mass(E', 2 eps) at the
    /// nearest eigenvalue E'.
    #[serde(serialize_with = "ser_opt_f17")]
    pub dichotomy_mass: Option<f64>,
}

fn ser_opt_f17<S: serde::Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_f17(v, s),
        None => s.serialize_str(""),
    }
}

/// sup of mass / eps^{1/2} over one decade of eps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecadeRatio {
    pub decade: i32,
    pub sup_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    /// C_emp = max over rows of mass / eps^{1/2}.
    pub sup_ratio: f64,
    pub per_decade: Vec<DecadeRatio>,
    /// max / min of the per-decade sups.
    pub spread: f64,
    pub sup_p_constant: f64,
    /// max over rows of eps_k / eps_{k+1}.
    pub max_eps_ratio: f64,
    pub rows: usize,
    pub flagged_rows: usize,
    pub chain_violations: usize,
    pub dichotomy_violations: usize,
    pub monotone_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    pub summary: ScanSummary,
}

impl ScanReport {
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn row_length(l_oracle: usize, eps: f64) -> usize {
    l_oracle.max((10.0 / eps).ceil() as usize)
}

struct RowInput<'a> {
    sc: &'a SchrodingerCocycle,
    theta: &'a [f64],
    op: &'a TruncatedOperator,
    in_spectrum: bool,
    k_max: usize,
}

fn estimate_row(input: &RowInput, eps: f64) -> Result<(ScanRow, f64)> {
    let e = input.sc.energy;
    let op = input.op;
    let mu = spectral_measure(op, (e - eps, e + eps));
    let m = borel_transform(op, Complex64::new(e, eps))?;
    let bound_mid = 2.0 * eps * m.im;
    let (k, acc) = epsk_policy(input.sc, input.theta, eps, input.k_max)?;
    let mut next = acc.clone();
    next.advance(input.sc)?;
    let p_norm = acc.p_norm();
    let bound_right = CHAIN_CONSTANT * acc.eps_k * acc.eps_k * p_norm;
    let flagged = input.in_spectrum && mu.richness < 3;
    let chain_ok = mu.mass <= 1.05 * bound_mid && bound_mid <= 1.05 * bound_right;
    let dichotomy_mass = if !input.in_spectrum && mu.richness > 0 {
        let e_prime = nearest_eigenvalue(op, e);
        Some(spectral_measure(op, (e_prime - 2.0 * eps, e_prime + 2.0 * eps)).mass)
    } else {
        None
    };
    let row = ScanRow {
        energy: e,
        eps,
        mu_mass: mu.mass,
        sqrt_bound_ratio: mu.mass / eps.sqrt(),
        k_used: k,
        eps_k: acc.eps_k,
        p_norm,
        bound_mid,
        bound_right,
        p_constant: p_norm * acc.eps_k.powf(1.5),
        l: op.l,
        richness: mu.richness,
        in_spectrum: input.in_spectrum,
        flagged,
        chain_ok,
        dichotomy_mass,
    };
    Ok((row, acc.eps_k / next.eps_k))
}

/// mass of (E - eps, E + eps), the resolvent bound and the P_k bound at the bracketing k.
pub fn modulus_estimate(config: &ScanConfig, e: f64, eps: f64) -> Result<ScanRow> {
    let sc = config.cocycle()?.at_energy(e);
    let l = row_length(config.l_oracle, eps);
    let op = TruncatedOperator::new(&sc, &config.theta, l);
    let in_spec = in_spectrum(&sc, &config.theta, e, config.l_oracle);
    let input = RowInput { sc: &sc, theta: &config.theta, op: &op, in_spectrum: in_spec, k_max: config.k_max };
    Ok(estimate_row(&input, eps)?.0)
}

fn decade_of(eps: f64, top: f64) -> i32 {
    let d = eps.log10().floor() as i32;
    // the largest grid point closes the last decade instead of opening a new one
    if (eps - top).abs() <= 1e-12 * top && (eps.log10() - eps.log10().round()).abs() < 1e-9 {
        d - 1
    } else {
        d
    }
}

/// Runs `modulus_estimate` over the (E, eps) grid, energies in parallel.
pub fn holder_scan(config: &ScanConfig) -> Result<ScanReport> {
    config.validate()?;
    let base = config.cocycle()?;
    let mut eps_grid = config.eps_grid.clone();
    eps_grid.sort_by(f64::total_cmp);
    let mut energies = config.e_grid.clone();
    energies.sort_by(f64::total_cmp);
    let per_energy: Vec<Result<(Vec<ScanRow>, f64, usize)>> = energies
        .par_iter()
        .map(|&e| {
            let sc = base.at_energy(e);
            let in_spec = in_spectrum(&sc, &config.theta, e, config.l_oracle);
            let mut rows = Vec::with_capacity(eps_grid.len());
            let mut max_ratio = 0.0f64;
            let mut cached: Option<TruncatedOperator> = None;
            for &eps in &eps_grid {
                let l = row_length(config.l_oracle, eps);
                if cached.as_ref().map(|op| op.l) != Some(l) {
                    cached = Some(TruncatedOperator::new(&sc, &config.theta, l));
                }
                let op = cached.as_ref().expect("operator built above");
                let input = RowInput { sc: &sc, theta: &config.theta, op, in_spectrum: in_spec, k_max: config.k_max };
                let (row, ratio) = estimate_row(&input, eps)?;
                max_ratio = max_ratio.max(ratio);
                rows.push(row);
            }
            // mass is monotone in eps; Im M(E + i eps) / eps nonincreasing
            let mut monotone_violations = 0;
            for w in rows.windows(2) {
                if w[1].mu_mass + 1e-12 < w[0].mu_mass {
                    monotone_violations += 1;
                }
                let (k0, k1) = (w[0].bound_mid / (w[0].eps * w[0].eps), w[1].bound_mid / (w[1].eps * w[1].eps));
                if k1 > k0 * (1.0 + 1e-9) {
                    monotone_violations += 1;
                }
            }
            Ok((rows, max_ratio, monotone_violations))
        })
        .collect();
    let mut rows = Vec::new();
    let mut max_eps_ratio = 0.0f64;
    let mut monotone_violations = 0;
    for r in per_energy {
        let (r, m, v) = r?;
        rows.extend(r);
        max_eps_ratio = max_eps_ratio.max(m);
        monotone_violations += v;
    }
    let summary = summarize(&rows, max_eps_ratio, monotone_violations);
    Ok(ScanReport { rows, summary })
}

fn summarize(rows: &[ScanRow], max_eps_ratio: f64, monotone_violations: usize) -> ScanSummary {
    let top = rows.iter().map(|r| r.eps).fold(0.0, f64::max);
    let mut per_decade: Vec<DecadeRatio> = Vec::new();
    for r in rows.iter().filter(|r| !r.flagged) {
        let dec = decade_of(r.eps, top);
        match per_decade.iter_mut().find(|d| d.decade == dec) {
            Some(d) => d.sup_ratio = d.sup_ratio.max(r.sqrt_bound_ratio),
            None => per_decade.push(DecadeRatio { decade: dec, sup_ratio: r.sqrt_bound_ratio }),
        }
    }
    per_decade.sort_by_key(|d| d.decade);
    let hi = per_decade.iter().map(|d| d.sup_ratio).fold(0.0, f64::max);
    let lo = per_decade.iter().map(|d| d.sup_ratio).fold(f64::INFINITY, f64::min);
    let spread = if lo > 0.0 && lo.is_finite() { hi / lo } else { f64::INFINITY };
    ScanSummary {
        sup_ratio: rows.iter().filter(|r| !r.flagged).map(|r| r.sqrt_bound_ratio).fold(0.0, f64::max),
        per_decade,
        spread,
        sup_p_constant: rows.iter().map(|r| r.p_constant).fold(0.0, f64::max),
        max_eps_ratio,
        rows: rows.len(),
        flagged_rows: rows.iter().filter(|r| r.flagged).count(),
        chain_violations: rows.iter().filter(|r| !r.flagged && !r.chain_ok).count(),
        dichotomy_violations: rows
            .iter()
            .filter(|r| matches!(r.dichotomy_mass, Some(m) if r.mu_mass > 1.0001 * m + 1e-12))
            .count(),
        monotone_violations,
    }
}

/// ||P_k|| ||P_k^{-1}||^3 along a list of k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRatioReport {
    pub energy: f64,
    /// (k, ||P_k||, ||P_k^{-1}||, ratio).
    pub rows: Vec<(usize, f64, f64, f64)>,
    pub sup_ratio: f64,
    /// Least-squares slope of ln ratio against ln k.
    pub slope: f64,
}

impl NormRatioReport {
    /// Literal criterion: |slope| <= tol.
    pub fn flat(&self, tol: f64) -> bool {
        self.slope.abs() <= tol
    }

    /// No growth: slope <= tol.
    pub fn no_growth(&self, tol: f64) -> bool {
        self.slope <= tol
    }
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Ratio series for sorted k_list, accumulating P_k once.
pub fn norm_ratio_check(sc: &SchrodingerCocycle, theta: &[f64], k_list: &[usize]) -> Result<NormRatioReport> {
    let mut ks = k_list.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.first() == Some(&0) || ks.is_empty() {
        return Err(Error::Invalid("k_list must be nonempty with k >= 1".into()));
    }
    let mut acc = WeylAccumulator::start(sc, theta);
    let mut rows = Vec::with_capacity(ks.len());
    for &k in &ks {
        while acc.k < k {
            acc.advance(sc)?;
        }
        let (pn, pin) = (acc.p_norm(), acc.p_inv_norm());
        rows.push((k, pn, pin, pn * pin.powi(3)));
    }
    let lx: Vec<f64> = rows.iter().map(|r| (r.0 as f64).ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.3.ln()).collect();
    let slope = if rows.len() > 1 { fit_slope(&lx, &ly) } else { 0.0 };
    let sup_ratio = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    Ok(NormRatioReport { energy: sc.energy, rows, sup_ratio, slope })
}

/// Bounds on P_k through the reducing conjugation: with Phi = B_n U^{-1},
/// ||P_k|| <= ||Phi||_0^4 ||X_k|| and ||P_k^{-1}||^{-1} >= ||Phi||_0^{-4} lambda_min(X_k),
/// where X_k is the odd-power sum of the triangular form of A_n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KamCrossCheck {
    pub phi_norm: f64,
    /// (k, ||P_k||, upper, lambda_min(P_k), lower).
    pub rows: Vec<(usize, f64, f64, f64, f64)>,
    pub holds: bool,
}

pub fn norm_ratio_kam_crosscheck(
    sc: &SchrodingerCocycle,
    theta: &[f64],
    k_list: &[usize],
    cfg: &KamConfig,
) -> Result<KamCrossCheck> {
    let (a0, f0) = kam::schrodinger_input(sc);
    let state = kam::kam_iterate(&a0, &f0, &sc.alpha, cfg)?;
    let schur = triangularize(&state.a);
    if schur.xi.im.abs() > 1e-12 {
        return Err(Error::Hypothesis("reduced constant is not elliptic (energy in a gap)".into()));
    }
    let t = TriangularUnimodular::new(schur.xi.re / (2.0 * PI), schur.c);
    let phi_norm = state.b.sup_norm(cfg.residual_grid.max(64));
    let mut ks = k_list.to_vec();
    ks.sort_unstable();
    let mut acc = WeylAccumulator::start(sc, theta);
    let mut rows = Vec::new();
    let mut holds = true;
    for &k in &ks {
        while acc.k < k {
            acc.advance(sc)?;
        }
        let x: CMat = closed_form_xk(&t, k);
        let (x_big, x_small) = {
            let (s1, s2) = mat2::singular_values(&x);
            (s1.max(s2), s1.min(s2))
        };
        let upper = phi_norm.powi(4) * x_big;
        let lower = x_small / phi_norm.powi(4);
        let p_big = acc.p_norm();
        let p_small = acc.det_p / p_big;
        let slack = 1e-6 + 1e-9 * k as f64;
        holds &= p_big <= upper * (1.0 + slack) && p_small >= lower * (1.0 - slack);
        rows.push((k, p_big, upper, p_small, lower));
    }
    Ok(KamCrossCheck { phi_norm, rows, holds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_bracket_is_floor() {
        let sc = SchrodingerCocycle::free(0.0);
        for eps in [0.3, 0.01, 0.0013] {
            let (k, acc) = epsk_policy(&sc, &[0.0], eps, 100_000).unwrap();
            assert_eq!(k, (1.0 / (2.0 * eps)).floor() as usize);
            assert!(acc.eps_k >= eps);
        }
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-4, 1e-1, 7);
        assert!((g[0] - 1e-4).abs() < 1e-18 && (g[6] - 1e-1).abs() < 1e-15);
        assert!((g[2] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn decades_close_at_the_top() {
        assert_eq!(decade_of(1e-1, 1e-1), -2);
        assert_eq!(decade_of(1e-2, 1e-1), -2);
        assert_eq!(decade_of(3e-4, 1e-1), -4);
    }
}
