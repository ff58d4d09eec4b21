//! Reducibility iteration for a two-frequency Schrodinger cocycle, printing the
//! step ledger and the a-posteriori checks.

use qpspec::cocycle::SchrodingerCocycle;
use qpspec::kam::{cn_bound_check, im_xi_check, kam_iterate, schrodinger_input, KamConfig};
use qpspec::torus::{FrequencyVector, TorusSeries};

fn main() -> qpspec::Result<()> {
    let energy: f64 = std::env::args().nth(1).map(|s| s.parse().expect("energy")).unwrap_or(1.0);
    let sc = SchrodingerCocycle::new(FrequencyVector::two_frequency(), TorusSeries::cos_sum(2), 0.05, energy)?;
    let (a0, f0) = schrodinger_input(&sc);
    let state = kam_iterate(&a0, &f0, &sc.alpha, &KamConfig::default())?;
    for rec in &state.ledger {
        println!("{}", rec.trace_line()?);
    }
    let cn = cn_bound_check(&state, 64);
    eprintln!("degree {:?}, |c| ||B||^8 = {:.4} <= {:.4}: {}", state.degree, cn.lhs, cn.rhs, cn.holds);
    eprintln!("|Im xi| <= eps^(1/4) along the run: {}", im_xi_check(&state).holds);
    Ok(())
}
