//! Square-root modulus scan driven by a JSON config (default: the two-frequency
//! config in examples/data).

use qpspec::format::to_json17;
use qpspec::holder::{holder_scan, ScanConfig};
use std::path::PathBuf;

fn main() -> qpspec::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data/scan_two_frequency.json")
    });
    let cfg = ScanConfig::load(&path)?;
    let report = holder_scan(&cfg)?;
    for r in &report.rows {
        eprintln!(
            "E={:>8.4} eps={:.1e} mass={:.4e} ratio={:.4} k={} chain={}",
            r.energy, r.eps, r.mu_mass, r.sqrt_bound_ratio, r.k_used, r.chain_ok
        );
    }
    println!("{}", to_json17(&report.summary)?);
    Ok(())
}
