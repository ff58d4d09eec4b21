mod common;

use common::{amo, snap};
use qpspec::cocycle::SchrodingerCocycle;
use qpspec::holder::{
    epsk_policy, holder_scan, in_spectrum, log_grid, modulus_estimate, norm_ratio_check, norm_ratio_kam_crosscheck,
    KWindowPolicy, PotentialSource, ScanConfig,
};
use qpspec::cocycle::CocycleMap;
use qpspec::kam::KamConfig;
use qpspec::mat2;
use qpspec::torus::{FrequencyVector, TorusSeries};
use qpspec::weyl::accumulate_pk;
use qpspec::Error;
use std::path::Path;

fn data(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data").join(name)
}

fn config(d: usize, lambda: f64, e_grid: Vec<f64>, eps_grid: Vec<f64>) -> ScanConfig {
    let alpha = if d == 1 { FrequencyVector::golden() } else { FrequencyVector::two_frequency() };
    ScanConfig {
        potential: PotentialSource::Inline(TorusSeries::cos_sum(d)),
        lambda,
        alpha: alpha.alpha,
        theta: vec![0.0; d],
        e_grid,
        eps_grid,
        l_oracle: 2000,
        k_window_policy: KWindowPolicy::Bracket,
        lambda_gate: 0.1,
        k_max: 1_000_000,
        diophantine: None,
        base_dir: None,
    }
}

/// 1 + max ||S_E||^2 over the scan energies, the square root of the det P_k step constant.
fn scale_bound(cfg: &ScanConfig) -> f64 {
    let base = cfg.cocycle().unwrap();
    let d = cfg.theta.len();
    let grid: Vec<Vec<f64>> =
        (0..32usize.pow(d as u32)).map(|i| (0..d).map(|j| (i / 32usize.pow(j as u32) % 32) as f64 / 32.0).collect()).collect();
    cfg.e_grid
        .iter()
        .flat_map(|&e| {
            let sc = base.at_energy(e);
            grid.iter().map(move |th| mat2::op_norm(&sc.matrix(th)).powi(2))
        })
        .fold(0.0, f64::max)
        + 1.0
}

#[test]
fn bracket_at_subcritical_energy() {
    let sc = amo(1, 0.05, 0.0);
    let (k, acc) = epsk_policy(&sc, &[0.0], 1e-3, 1_000_000).unwrap();
    assert_eq!(acc.k, k);
    let next = accumulate_pk(&sc, &[0.0], k + 1).unwrap();
    assert!(next.eps_k < 1e-3 && 1e-3 <= acc.eps_k);
}

#[test]
fn bracket_out_of_range() {
    let sc = SchrodingerCocycle::free(0.0);
    assert!(matches!(epsk_policy(&sc, &[0.0], 0.9, 100), Err(Error::NoBracket(1))));
    assert!(matches!(epsk_policy(&sc, &[0.0], 1e-6, 100), Err(Error::NoBracket(100))));
}

#[test]
fn free_norm_ratio_decays_like_inverse_square() {
    let rep = norm_ratio_check(&SchrodingerCocycle::free(0.0), &[0.0], &[1, 10, 100, 1000]).unwrap();
    for &(k, _, _, ratio) in &rep.rows {
        assert!((ratio - (k as f64).powi(-2)).abs() < 1e-12);
    }
    assert!((rep.slope + 2.0).abs() < 1e-9);
    assert!(rep.no_growth(0.1));
}

#[test]
fn norm_ratio_has_no_growth_in_the_spectrum() {
    let ks: Vec<usize> = (0..=12).map(|i| 10f64.powf(1.0 + 3.0 * i as f64 / 12.0).round() as usize).collect();
    for d in [1, 2] {
        let base = amo(d, 0.05, 0.0);
        let theta = vec![0.0; d];
        let e = snap(&base, &theta, 2000, 0.0);
        let rep = norm_ratio_check(&base.at_energy(e), &theta, &ks).unwrap();
        assert!(rep.no_growth(0.1), "d={d} slope {}", rep.slope);
        assert!(rep.sup_ratio.is_finite());
    }
}

#[test]
fn kam_route_bounds_p_k() {
    let base = amo(2, 0.05, 0.0);
    let e = snap(&base, &[0.0, 0.0], 2000, 0.3);
    let ks = [10, 100, 1000];
    let x = norm_ratio_kam_crosscheck(&base.at_energy(e), &[0.0, 0.0], &ks, &KamConfig::default()).unwrap();
    assert!(x.holds, "{x:?}");
}

#[test]
fn out_of_spectrum_row_has_no_mass() {
    let cfg = config(2, 0.05, vec![3.0], log_grid(1e-4, 1e-1, 4));
    assert!(!in_spectrum(&cfg.cocycle().unwrap().at_energy(3.0), &[0.0, 0.0], 3.0, 2000));
    let row = modulus_estimate(&cfg, 3.0, 1e-2).unwrap();
    assert_eq!(row.mu_mass, 0.0);
    assert!(!row.in_spectrum);
}

#[test]
fn free_center_row_matches_arcsine_law() {
    let cfg = config(1, 0.0, vec![0.0], log_grid(1e-4, 1e-1, 4));
    let eps: f64 = 1e-2;
    let mut wide = cfg.clone();
    wide.l_oracle = 20_000;
    let row = modulus_estimate(&wide, 0.0, eps).unwrap();
    let exact = 2.0 * 2.0 * (eps / 2.0).asin() / std::f64::consts::PI;
    assert!((row.mu_mass - exact).abs() < 0.02 * exact, "{} vs {exact}", row.mu_mass);
    assert!(row.mu_mass <= row.bound_mid * 1.05 && row.bound_mid <= row.bound_right * 1.05);
}

#[test]
fn free_scan_from_config_file() {
    let cfg = ScanConfig::load(&data("scan_free.json")).unwrap();
    assert_eq!(cfg.k_window_policy, KWindowPolicy::Bracket);
    let rep = holder_scan(&cfg).unwrap();
    let s = &rep.summary;
    assert_eq!(s.rows, 24);
    assert!(s.sup_ratio.is_finite() && s.sup_ratio > 0.0);
    // the spectral edges carry mass ~ eps^(1/2) and dominate every decade
    assert!(s.spread <= 4.0, "{s:?}");
    assert!(s.max_eps_ratio <= scale_bound(&cfg), "{s:?}");
    assert_eq!(s.chain_violations, 0);
    assert_eq!(s.monotone_violations, 0);
    for r in &rep.rows {
        assert!(r.mu_mass <= s.sup_ratio * r.eps.sqrt() * (1.0 + 1e-12) || r.flagged);
    }
    let mut out = Vec::new();
    rep.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with(
        "E,eps,mu_mass,sqrt_bound_ratio,k_used,eps_k,P_norm,bound_mid,bound_right,p_constant,L,richness,in_spectrum,flagged,chain_ok,dichotomy_mass"
    ));
    assert_eq!(text.lines().count(), 25);
}

#[test]
fn free_interior_ratio_grows_like_sqrt_eps() {
    let cfg = config(1, 0.0, vec![-1.0, 0.0, 0.5, 1.5], vec![4e-4, 4e-3, 4e-2, 4e-1]);
    let s = holder_scan(&cfg).unwrap().summary;
    // a smooth density gives mass ~ eps, so the ratio gains sqrt(10) per decade
    for w in s.per_decade.windows(2).take(2) {
        assert!((w[1].sup_ratio / w[0].sup_ratio - 10f64.sqrt()).abs() < 0.05 * 10f64.sqrt(), "{s:?}");
    }
}

#[test]
fn config_validation() {
    let mut cfg = config(1, 0.2, vec![0.0], log_grid(1e-4, 1e-1, 4));
    assert!(matches!(cfg.validate(), Err(Error::Hypothesis(_))));
    cfg.lambda = 0.05;
    cfg.eps_grid = log_grid(1e-3, 1e-1, 4);
    assert!(matches!(cfg.validate(), Err(Error::Invalid(_))));
    cfg.eps_grid = log_grid(1e-4, 1e-1, 4);
    assert!(cfg.validate().is_ok());
    cfg.alpha = vec![0.5];
    assert!(matches!(cfg.validate(), Err(Error::NotDiophantine { .. })));
}

#[test]
fn config_file_resolves_relative_potential() {
    let cfg = ScanConfig::load(&data("scan_two_frequency.json")).unwrap();
    assert_eq!(cfg.potential().unwrap(), TorusSeries::cos_sum(2));
    assert!(cfg.validate().is_ok());
}

#[test]
fn bracket_ratio_stays_bounded_along_a_scan() {
    let e = snap(&amo(2, 0.05, 0.0), &[0.0, 0.0], 2000, -0.8);
    let cfg = config(2, 0.05, vec![e], log_grid(1e-3, 1.0 / 4.0, 6).into_iter().chain([1e-4]).collect());
    let rep = holder_scan(&cfg).unwrap();
    assert!(rep.summary.max_eps_ratio <= scale_bound(&cfg));
    assert_eq!(rep.summary.chain_violations, 0);
    assert_eq!(rep.summary.monotone_violations, 0);
}
