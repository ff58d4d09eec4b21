//! KAM scheme for cocycles close to constant: one conjugation step (homological solve, or a
//! half-rotation that removes a resonance first) and the iteration on a shrinking strip.

use crate::cocycle::SchrodingerCocycle;
use crate::error::{Error, Result};
use crate::format::to_json17;
use crate::mat2::{self, CMat, RMat, C64, ONE};
use crate::torus::{dist_to_z, for_each_in_shell, FrequencyVector, TorusSeries, ValueClass};
use crate::triangular::triangularize;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Tunables of the scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KamConfig {
    /// Initial strip width.
    pub r0: f64,
    /// Limiting strip width.
    pub r: f64,
    /// Grid points per axis for pointwise products and the strip norm.
    pub grid: usize,
    /// Largest |n|_inf kept in any series.
    pub max_degree: usize,
    pub drop_tol: f64,
    /// Resonance threshold is resonance_constant * eps^resonance_exponent.
    pub resonance_constant: f64,
    pub resonance_exponent: f64,
    /// Largest admissible ||f_0||_{r0}.
    pub eps_star: f64,
    /// Stop once eps_j drops below this.
    pub floor: f64,
    pub max_steps: usize,
    /// Grid points per axis for the conjugation-identity residual and ||B||_0.
    pub residual_grid: usize,
}

impl Default for KamConfig {
    fn default() -> Self {
        Self {
            r0: 0.1,
            r: 0.05,
            grid: 32,
            max_degree: 15,
            drop_tol: 1e-15,
            resonance_constant: 0.05,
            resonance_exponent: 0.5,
            eps_star: 0.25,
            floor: 1e-12,
            max_steps: 8,
            residual_grid: 64,
        }
    }
}

impl KamConfig {
    /// r_j with r_j - r_{j+1} = (r0 - r) / 4^{j+1}.
    pub fn radius(&self, j: usize) -> f64 {
        let mut r = self.r0;
        for i in 0..j {
            r -= (self.r0 - self.r) / 4f64.powi(i as i32 + 1);
        }
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    NonResonant,
    Resonant,
}

/// Spectral data of a constant SL(2,R) matrix: eigenvalue e^{i xi} and the off-diagonal
/// entry of its unitary triangular form (modulus).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ASpec {
    pub re_xi: f64,
    pub im_xi: f64,
    pub c: f64,
}

impl ASpec {
    pub fn of(a: &RMat) -> Self {
        let s = triangularize(a);
        Self { re_xi: s.xi.re, im_xi: s.xi.im, c: s.c.norm() }
    }
}

/// Ledger entry for one step j -> j+1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub j: usize,
    pub kind: StepKind,
    #[serde(rename = "N")]
    pub n_cut: usize,
    pub resonance: Option<Vec<i32>>,
    pub smallest_divisor: f64,
    pub r: f64,
    pub r_next: f64,
    /// ||f_j||_{r_j}.
    pub eps: f64,
    /// ||f_{j+1}||_{r_{j+1}}.
    pub eps_next: f64,
    /// ||B_bar||_0 of this step's conjugation.
    pub b_bar_norm: f64,
    /// ||A_{j+1} - A_j||.
    pub a_shift: f64,
    /// ||B_{j+1}||_0 of the accumulated conjugation.
    #[serde(rename = "B_norm")]
    pub b_norm: f64,
    #[serde(rename = "A_spec")]
    pub a_spec: ASpec,
    /// max over the residual grid of ||B(theta+alpha)^{-1} A_0 e^{f_0} B(theta) - A e^{f}||.
    pub residual: f64,
    /// Contraction exponent eps_next = eps^p measured.
    pub measured_exponent: f64,
    /// Exponent asserted numerically: 3/2 non-resonant, 2 resonant.
    pub target_exponent: f64,
    /// Exponent of the asymptotic statement: 3 - 1/5 non-resonant, 1600 resonant.
    pub nominal_exponent: f64,
}

impl StepRecord {
    /// One kam-trace JSON line.
    pub fn trace_line(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Line<'a> {
            j: usize,
            kind: StepKind,
            #[serde(rename = "N")]
            n: usize,
            resonance: &'a Option<Vec<i32>>,
            eps: f64,
            #[serde(rename = "B_norm")]
            b_norm: f64,
            #[serde(rename = "A_spec")]
            a_spec: ASpec,
            residual: f64,
        }
        Ok(to_json17(&Line {
            j: self.j,
            kind: self.kind,
            n: self.n_cut,
            resonance: &self.resonance,
            eps: self.eps_next,
            b_norm: self.b_norm,
            a_spec: self.a_spec,
            residual: self.residual,
        })?)
    }

    /// eps_{j+1} <= eps_j^{target} (or below the floor).
    pub fn contracts(&self, floor: f64) -> bool {
        self.eps_next <= self.eps.powf(self.target_exponent) || self.eps_next < floor
    }
}

/// One factor of a conjugation.
#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    /// exp(Y(theta)) for an sl2-valued series Y.
    Exp(TorusSeries),
    Constant(RMat),
    /// R_{<n, theta>/2}, evaluated on the lifted angle.
    HalfRotation(Vec<i32>),
}

/// Ordered product B(theta) = F_1(theta) F_2(theta) ... F_m(theta). Half rotations make B
/// single-valued only on the lifted torus; evaluations at theta + alpha must use the
/// unreduced point.
#[derive(Clone, Debug, PartialEq)]
pub struct Conjugation {
    pub d: usize,
    pub factors: Vec<Factor>,
}

impl Conjugation {
    pub fn identity(d: usize) -> Self {
        Self { d, factors: Vec::new() }
    }

    pub fn append(&mut self, other: Conjugation) {
        self.factors.extend(other.factors);
    }

    /// Sum of the half-rotation vectors: B has degree degree/2.
    pub fn degree(&self) -> Vec<i32> {
        let mut deg = vec![0; self.d];
        for f in &self.factors {
            if let Factor::HalfRotation(n) = f {
                for (a, b) in deg.iter_mut().zip(n) {
                    *a += b;
                }
            }
        }
        deg
    }

    /// True when B is only defined up to sign on the torus (an odd degree component).
    pub fn sign_ambiguous(&self) -> bool {
        self.degree().iter().any(|k| k % 2 != 0)
    }

    pub fn evaluate(&self, theta: &[f64]) -> CMat {
        let mut out = CMat::identity();
        for f in &self.factors {
            out *= match f {
                Factor::Exp(y) => mat2::exp_traceless(&y.evaluate(theta, &[])),
                Factor::Constant(p) => mat2::complexify(p),
                Factor::HalfRotation(n) => half_rotation(n, theta),
            };
        }
        out
    }

    /// Values at theta_k + shift for the tensor grid theta_k = k/m (first axis slowest).
    pub fn eval_grid(&self, m: usize, shift: &[f64]) -> Vec<CMat> {
        let points = m.pow(self.d as u32);
        let mut out = vec![CMat::identity(); points];
        for f in &self.factors {
            match f {
                Factor::Exp(y) => {
                    let vals = y.translate(shift).eval_grid(m, &vec![0.0; self.d]);
                    for (o, v) in out.iter_mut().zip(&vals) {
                        *o *= mat2::exp_traceless(v);
                    }
                }
                Factor::Constant(p) => {
                    let pc = mat2::complexify(p);
                    for o in out.iter_mut() {
                        *o *= pc;
                    }
                }
                Factor::HalfRotation(n) => {
                    for (idx, o) in out.iter_mut().enumerate() {
                        let theta = grid_point(self.d, m, idx, shift);
                        *o *= half_rotation(n, &theta);
                    }
                }
            }
        }
        out
    }

    /// max over the m-grid of ||B(theta)||.
    pub fn sup_norm(&self, m: usize) -> f64 {
        self.eval_grid(m, &vec![0.0; self.d]).iter().map(mat2::op_norm).fold(1.0, f64::max)
    }
}

fn half_rotation(n: &[i32], theta: &[f64]) -> CMat {
    let phase: f64 = n.iter().zip(theta).map(|(&k, &t)| k as f64 * t).sum();
    mat2::complexify(&mat2::rotation(0.5 * phase))
}

fn grid_point(d: usize, m: usize, idx: usize, shift: &[f64]) -> Vec<f64> {
    let mut rest = idx;
    let mut theta = vec![0.0; d];
    for i in (0..d).rev() {
        theta[i] = (rest % m) as f64 / m as f64 + shift[i];
        rest /= m;
    }
    theta
}

/// State of the iteration after j steps:
/// B_j(theta + alpha)^{-1} A_0 e^{f_0(theta)} B_j(theta) = A_j e^{f_j(theta)}.
#[derive(Clone, Debug)]
pub struct KamState {
    pub j: usize,
    pub r_j: f64,
    pub eps_j: f64,
    pub a: RMat,
    pub xi: C64,
    pub b: Conjugation,
    pub f: TorusSeries,
    pub degree: Vec<i32>,
    pub ledger: Vec<StepRecord>,
    pub alpha: FrequencyVector,
    pub a0: RMat,
    pub f0: TorusSeries,
    pub eps0: f64,
}

impl KamState {
    /// Conjugation-identity residual on an m^d grid.
    pub fn identity_residual(&self, m: usize) -> f64 {
        identity_residual(&self.alpha, &self.a0, &self.f0, &self.b, &self.a, &self.f, m)
    }

    /// ||B_j||_0 sampled on an m^d grid.
    pub fn b_norm(&self, m: usize) -> f64 {
        self.b.sup_norm(m)
    }
}

/// max over the grid of ||B(theta+alpha)^{-1} A_0 e^{f_0(theta)} B(theta) - A e^{f(theta)}||.
pub fn identity_residual(
    alpha: &FrequencyVector,
    a0: &RMat,
    f0: &TorusSeries,
    b: &Conjugation,
    a: &RMat,
    f: &TorusSeries,
    m: usize,
) -> f64 {
    let d = alpha.d();
    let zero = vec![0.0; d];
    let b_here = b.eval_grid(m, &zero);
    let b_next = b.eval_grid(m, &alpha.alpha);
    let f0v = f0.eval_grid(m, &zero);
    let fv = f.eval_grid(m, &zero);
    let (a0c, ac) = (mat2::complexify(a0), mat2::complexify(a));
    (0..b_here.len())
        .map(|i| {
            let lhs = mat2::sl2_inv(&b_next[i]) * a0c * mat2::exp_traceless(&f0v[i]) * b_here[i];
            let rhs = ac * mat2::exp_traceless(&fv[i]);
            mat2::op_norm(&(lhs - rhs))
        })
        .fold(0.0, f64::max)
}

/// First lattice point 0 < |n|_inf <= n_max (by sup norm, then lexicographically) with
/// ||Re(xi)/pi - <n, alpha>||_{R/Z} < threshold. xi is in radians (eigenvalue e^{i xi}).
pub fn resonance_scan(xi: C64, alpha: &FrequencyVector, n_max: usize, threshold: f64) -> Option<Vec<i32>> {
    let target = xi.re / PI;
    let mut found = None;
    for s in 1..=n_max as i32 {
        for_each_in_shell(alpha.d(), s, |n| {
            if dist_to_z(target - alpha.dot(n)) < threshold {
                found = Some(n.to_vec());
                false
            } else {
                true
            }
        });
        if found.is_some() {
            break;
        }
    }
    found
}

/// Smallest N whose r-weighted tail sum_{|n|_inf > N} |c_n| e^{2 pi |n|_1 r} is <= eps^2,
/// capped by 2|ln eps| / (r - r_next) and by the configured degree.
pub fn effective_cutoff(f: &TorusSeries, r: f64, r_next: f64, eps: f64, cfg: &KamConfig) -> usize {
    let schedule = (2.0 * eps.ln().abs() / (r - r_next)).floor();
    let cap = (schedule.min(cfg.max_degree as f64) as usize).max(1);
    let weighted: Vec<(i32, f64)> = f
        .coeffs()
        .iter()
        .map(|(n, c)| {
            let l1: i32 = n.iter().map(|k| k.abs()).sum();
            let sup = n.iter().map(|k| k.abs()).max().unwrap_or(0);
            (sup, mat2::op_norm(c) * (2.0 * PI * l1 as f64 * r).exp())
        })
        .collect();
    for n in 1..=cap {
        let tail: f64 = weighted.iter().filter(|(s, _)| *s > n as i32).map(|(_, w)| w).sum();
        if tail <= eps * eps {
            return n;
        }
    }
    cap
}

/// Result of one conjugation step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub b_bar: Conjugation,
    pub a_plus: RMat,
    pub f_plus: TorusSeries,
    pub record: StepRecord,
}

/// Solves (e^{2 pi i <n,alpha>} Ad_{A^{-1}} - I) y_n = g_n for 0 < |n|_inf <= n_cut and
/// returns Y with the smallest divisor met.
fn homological_solve(a: &RMat, g: &TorusSeries, alpha: &FrequencyVector, n_cut: usize) -> (TorusSeries, f64) {
    let ac = mat2::complexify(a);
    let ad = mat2::adjoint_matrix(&mat2::sl2_inv(&ac));
    let xi = triangularize(a).xi;
    let two_xi = xi * 2.0;
    let mut y = TorusSeries::zero(g.d(), ValueClass::Sl2R);
    let mut smallest = f64::INFINITY;
    let mut coeffs = Vec::new();
    for (n, c) in g.coeffs() {
        let sup = n.iter().map(|k| k.abs()).max().unwrap_or(0);
        if sup == 0 || sup as usize > n_cut {
            continue;
        }
        let angle = 2.0 * PI * alpha.dot(n).rem_euclid(1.0);
        let ph = C64::from_polar(1.0, angle);
        for shift in [C64::new(0.0, 0.0), two_xi, -two_xi] {
            let e = (C64::new(0.0, angle) + C64::new(0.0, 1.0) * shift).exp() - ONE;
            smallest = smallest.min(e.norm());
        }
        let mut m = ad;
        for (i, row) in m.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v *= ph;
                if i == k {
                    *v -= ONE;
                }
            }
        }
        let (sol, _) = mat2::solve3(&m, &mat2::sl2_coords(c));
        coeffs.push((n.clone(), mat2::sl2_from_coords(&sol)));
    }
    if !coeffs.is_empty() {
        y = TorusSeries::from_coeffs(g.d(), ValueClass::Sl2R, coeffs).expect("dimension matches");
        y = y.symmetrize();
    }
    (y, smallest)
}

/// Real P with det P = 1 and P^{-1} A P = R_rho for elliptic A; returns (P, rho, sign) where
/// rho = sign * xi / (2 pi).
fn rotation_frame(a: &RMat) -> (RMat, f64, i32) {
    let xi = (0.5 * a.trace()).clamp(-1.0, 1.0).acos();
    let lambda = C64::from_polar(1.0, -xi);
    let ac = mat2::complexify(a);
    let (p, q, r, s) = (ac[(0, 0)], ac[(0, 1)], ac[(1, 0)], ac[(1, 1)]);
    let v = if q.norm() >= r.norm() { [q, lambda - p] } else { [lambda - s, r] };
    let (x, mut y) = ([v[0].re, v[1].re], [v[0].im, v[1].im]);
    let mut det = x[0] * y[1] - x[1] * y[0];
    let mut sign = 1;
    if det < 0.0 {
        y = [-y[0], -y[1]];
        det = -det;
        sign = -1;
    }
    let scale = det.sqrt();
    let frame = RMat::new(x[0] / scale, y[0] / scale, x[1] / scale, y[1] / scale);
    (frame, sign as f64 * xi / (2.0 * PI), sign)
}

/// One step: conjugates (alpha, A e^{f}) to (alpha, A_+ e^{f_+}) with ||f_+||_{r_next}
/// much smaller than ||f||_r.
pub fn kam_step(
    a: &RMat,
    f: &TorusSeries,
    r: f64,
    r_next: f64,
    alpha: &FrequencyVector,
    cfg: &KamConfig,
) -> Result<StepOutcome> {
    let d = alpha.d();
    let eps = f.norm_r(r, cfg.grid);
    let abort = |reason: String| Error::KamAbort { step: 0, reason, ledger: Vec::new() };
    if !(0.0 < r_next && r_next < r) {
        return Err(Error::Invalid("radii must satisfy 0 < r_next < r".into()));
    }
    let a_spec = ASpec::of(a);
    if f.is_zero() || eps == 0.0 {
        let record = StepRecord {
            j: 0,
            kind: StepKind::NonResonant,
            n_cut: 0,
            resonance: None,
            smallest_divisor: f64::INFINITY,
            r,
            r_next,
            eps: 0.0,
            eps_next: 0.0,
            b_bar_norm: 1.0,
            a_shift: 0.0,
            b_norm: 1.0,
            a_spec,
            residual: 0.0,
            measured_exponent: f64::INFINITY,
            target_exponent: 1.5,
            nominal_exponent: 3.0 - 0.2,
        };
        return Ok(StepOutcome { b_bar: Conjugation::identity(d), a_plus: *a, f_plus: f.clone(), record });
    }
    let n_cut = effective_cutoff(f, r, r_next, eps, cfg);
    let xi = triangularize(a).xi;
    let elliptic = (0.5 * a.trace()).abs() < 1.0;
    let threshold = cfg.resonance_constant * eps.powf(cfg.resonance_exponent);
    let resonance = if elliptic { resonance_scan(xi, alpha, n_cut, threshold) } else { None };

    let mut b_bar = Conjugation::identity(d);
    let (a_work, g, solve_cut, used) = match &resonance {
        None => (*a, f.clone(), n_cut, None),
        Some(n) => {
            let (frame, rho, sign) = rotation_frame(a);
            let n_used: Vec<i32> = n.iter().map(|k| sign * k).collect();
            let a_rot = mat2::rotation(rho - 0.5 * alpha.dot(&n_used));
            let frame_c = mat2::complexify(&frame);
            let frame_inv = mat2::sl2_inv(&frame_c);
            let zero = vec![0.0; d];
            let values: Vec<CMat> = f
                .eval_grid(cfg.grid, &zero)
                .iter()
                .enumerate()
                .map(|(idx, v)| {
                    let q = half_rotation(&n_used, &grid_point(d, cfg.grid, idx, &zero));
                    mat2::sl2_inv(&q) * frame_inv * v * frame_c * q
                })
                .collect();
            let g = TorusSeries::from_grid(d, cfg.grid, &values, cfg.max_degree, cfg.drop_tol, ValueClass::Sl2R);
            b_bar.factors.push(Factor::Constant(frame));
            b_bar.factors.push(Factor::HalfRotation(n_used.clone()));
            (a_rot, g, cfg.max_degree, Some(n_used))
        }
    };
    let (y, smallest_divisor) = homological_solve(&a_work, &g, alpha, solve_cut);
    if smallest_divisor < 1e-14 {
        return Err(abort(format!("small divisor {smallest_divisor:e} without a flagged resonance")));
    }
    let mean = g.coeff(&vec![0; d]);
    let a_plus = mat2::real_part(&(mat2::complexify(&a_work) * mat2::expm(&mean)));
    if !y.is_zero() {
        b_bar.factors.push(Factor::Exp(y));
    }

    let zero = vec![0.0; d];
    let b_here = b_bar.eval_grid(cfg.grid, &zero);
    let b_next = b_bar.eval_grid(cfg.grid, &alpha.alpha);
    let fv = f.eval_grid(cfg.grid, &zero);
    let ac = mat2::complexify(a);
    let a_plus_inv = mat2::sl2_inv(&mat2::complexify(&a_plus));
    let logs: Vec<CMat> = (0..fv.len())
        .map(|i| {
            let m = a_plus_inv * mat2::sl2_inv(&b_next[i]) * ac * mat2::exp_traceless(&fv[i]) * b_here[i];
            mat2::log_sl2(&m)
        })
        .collect();
    let f_plus = TorusSeries::from_grid(d, cfg.grid, &logs, cfg.max_degree, cfg.drop_tol, ValueClass::Sl2R);
    let eps_next = f_plus.norm_r(r_next, cfg.grid);
    let b_bar_norm = b_here.iter().map(mat2::op_norm).fold(1.0, f64::max);
    let kind = if used.is_some() { StepKind::Resonant } else { StepKind::NonResonant };
    let (target_exponent, nominal_exponent) = match kind {
        StepKind::NonResonant => (1.5, 3.0 - 0.2),
        StepKind::Resonant => (2.0, 1600.0),
    };
    let record = StepRecord {
        j: 0,
        kind,
        n_cut,
        resonance: used,
        smallest_divisor,
        r,
        r_next,
        eps,
        eps_next,
        b_bar_norm,
        a_shift: mat2::op_norm_real(&(a_plus - a)),
        b_norm: b_bar_norm,
        a_spec: ASpec::of(&a_plus),
        residual: f64::NAN,
        measured_exponent: if eps_next > 0.0 { eps_next.ln() / eps.ln() } else { f64::INFINITY },
        target_exponent,
        nominal_exponent,
    };
    if !(eps_next <= eps) {
        return Err(abort(format!("no contraction: ||f_+|| = {eps_next:e} > eps = {eps:e}")));
    }
    Ok(StepOutcome { b_bar, a_plus, f_plus, record })
}

/// Iterates `kam_step` on the radius schedule until eps_j < floor or max_steps.
pub fn kam_iterate(a0: &RMat, f0: &TorusSeries, alpha: &FrequencyVector, cfg: &KamConfig) -> Result<KamState> {
    let d = alpha.d();
    if f0.d() != d {
        return Err(Error::Invalid("series and frequency dimensions differ".into()));
    }
    let eps0 = f0.norm_r(cfg.r0, cfg.grid);
    if eps0 > cfg.eps_star {
        return Err(Error::Hypothesis(format!(
            "||f_0||_r0 = {eps0:e} exceeds the step threshold {:e}",
            cfg.eps_star
        )));
    }
    let mut state = KamState {
        j: 0,
        r_j: cfg.r0,
        eps_j: eps0,
        a: *a0,
        xi: triangularize(a0).xi,
        b: Conjugation::identity(d),
        f: f0.clone(),
        degree: vec![0; d],
        ledger: Vec::new(),
        alpha: alpha.clone(),
        a0: *a0,
        f0: f0.clone(),
        eps0,
    };
    while state.eps_j >= cfg.floor && state.j < cfg.max_steps {
        let r_next = cfg.radius(state.j + 1);
        let mut out = match kam_step(&state.a, &state.f, state.r_j, r_next, alpha, cfg) {
            Ok(o) => o,
            Err(Error::KamAbort { reason, .. }) => {
                return Err(Error::KamAbort { step: state.j, reason, ledger: state.ledger });
            }
            Err(e) => return Err(e),
        };
        state.b.append(out.b_bar);
        if let Some(n) = &out.record.resonance {
            for (a, b) in state.degree.iter_mut().zip(n) {
                *a += b;
            }
        }
        state.a = out.a_plus;
        state.xi = triangularize(&state.a).xi;
        state.f = out.f_plus;
        state.eps_j = out.record.eps_next;
        state.r_j = r_next;
        out.record.j = state.j;
        out.record.b_norm = state.b.sup_norm(cfg.residual_grid);
        out.record.residual = state.identity_residual(cfg.residual_grid);
        state.ledger.push(out.record);
        state.j += 1;
    }
    Ok(state)
}

/// A_0 = (E, -1; 1, 0) and f_0 = (0 0; lambda V 0), so that A_0 e^{f_0} is the
/// Schrodinger cocycle.
pub fn schrodinger_input(sc: &SchrodingerCocycle) -> (RMat, TorusSeries) {
    (RMat::new(sc.energy, -1.0, 1.0, 0.0), sc.v.lower_nilpotent(sc.lambda))
}

/// |c_n| ||B_n||_0^8 against 4 ||A_0||.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnBoundReport {
    pub c: f64,
    pub b_norm: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn cn_bound_check(state: &KamState, grid: usize) -> CnBoundReport {
    let c = triangularize(&state.a).c.norm();
    let b_norm = state.b.sup_norm(grid);
    let lhs = c * b_norm.powi(8);
    let rhs = 4.0 * mat2::op_norm_real(&state.a0);
    CnBoundReport { c, b_norm, lhs, rhs, holds: lhs <= rhs }
}

/// |Im xi_j| <= eps_j^{1/4} along the run (j = 0 included).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImXiReport {
    /// (j, |Im xi_j|, eps_j^{1/4}).
    pub steps: Vec<(usize, f64, f64)>,
    pub holds: bool,
}

pub fn im_xi_check(state: &KamState) -> ImXiReport {
    let mut steps = vec![(0, triangularize(&state.a0).xi.im.abs(), state.eps0.powf(0.25))];
    for rec in &state.ledger {
        steps.push((rec.j + 1, rec.a_spec.im_xi.abs(), rec.eps_next.powf(0.25)));
    }
    let holds = steps.iter().all(|(_, im, bound)| im <= bound);
    ImXiReport { steps, holds }
}
