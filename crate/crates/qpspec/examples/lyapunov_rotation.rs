//! Lyapunov exponent, fibered rotation number and integrated density of states of the
//! almost Mathieu cocycle, compared with eigenvalue counting.

use qpspec::cocycle::{ids, lyapunov_exponent, rotation_number, uniform_hyperbolicity_probe, SchrodingerCocycle};
use qpspec::torus::{FrequencyVector, TorusSeries};
use qpspec::weyl::TruncatedOperator;

fn main() -> qpspec::Result<()> {
    let base = SchrodingerCocycle::new(FrequencyVector::golden(), TorusSeries::cos_sum(1), 0.1, 0.0)?;
    let op = TruncatedOperator::new(&base, &[0.0], 5000);
    println!("{:>6} {:>10} {:>8} {:>8} {:>8} {:>5}", "E", "LE", "rho", "N_rot", "N_count", "UH");
    for i in 0..13 {
        let e = -3.0 + 0.5 * i as f64;
        let sc = base.at_energy(e);
        let le = lyapunov_exponent(&sc, 20_000, 4, 0);
        let rho = rotation_number(&sc, 50_000, &[0.0]).rho;
        let n_rot = ids(&sc, 50_000, &[0.0]);
        let n_count = op.count_below(e) as f64 / op.len() as f64;
        let uh = uniform_hyperbolicity_probe(&sc, 200, 4).hyperbolic;
        println!("{e:>6.2} {le:>10.6} {rho:>8.5} {n_rot:>8.5} {n_count:>8.5} {uh:>5}");
    }
    Ok(())
}
