//! Fourier series on the torus: strip norms, the nilpotent exponential and
//! Diophantine certificates.

use qpspec::torus::{check_diophantine, exp_sl2, FrequencyVector, TorusSeries};
use std::f64::consts::PI;

fn main() -> qpspec::Result<()> {
    let v = TorusSeries::cos_sum(1);
    for r in [0.0, 0.05, 0.1] {
        println!("||cos||_{r} = {:.12} (cosh 2 pi r = {:.12})", v.norm_r(r, 512), (2.0 * PI * r).cosh());
    }

    let f = TorusSeries::cos_sum(2).lower_nilpotent(0.05);
    let e = exp_sl2(&f, 2)?;
    println!("exp of (0 0; lambda V 0) has {} coefficients (I + f)", e.coeffs().len());

    for (name, alpha, kappa, tau, n) in [
        ("golden mean", FrequencyVector::golden(), 0.25, 1.5, 10_000),
        ("(sqrt2-1, sqrt3-1)", FrequencyVector::two_frequency(), 0.05, 2.5, 200),
    ] {
        let cert = check_diophantine(&alpha, kappa, tau, n)?;
        println!("{name}: certified up to |n| <= {n}, worst ratio {:.4} at {:?}", cert.worst_ratio, cert.worst_n);
    }
    match check_diophantine(&FrequencyVector::new(vec![0.5])?, 0.1, 1.5, 10) {
        Err(e) => println!("alpha = 1/2: {e}"),
        Ok(_) => unreachable!(),
    }

    println!("{}", TorusSeries::cos_sum(2).to_json()?);
    Ok(())
}
