//! Odd-power sums of triangular unimodular matrices: closed form against direct
//! summation, the two-case bounds and the Schur form of a Schrodinger matrix.

use num_complex::Complex64;
use qpspec::mat2::{self, CMat, RMat};
use qpspec::triangular::{closed_form_xk, det_xk_closed, triangularize, xk_two_case_bounds, TriangularUnimodular};

fn main() -> qpspec::Result<()> {
    let t = TriangularUnimodular::new(0.2113, Complex64::new(1.5, -0.4));
    let m = t.matrix();
    let mut power = m;
    let mut direct = CMat::zeros();
    for k in 1..=1000 {
        direct += power.adjoint() * power;
        power = m * m * power;
        if [1, 10, 100, 1000].contains(&k) {
            let closed = closed_form_xk(&t, k);
            let b = xk_two_case_bounds(&t, k)?;
            println!(
                "k={k:>4} rel err {:.2e} det {:.6e} (closed {:.6e}) sigma_min {:.3e} >= {:.3e}, norm {:.3e} <= {:.3e}",
                (closed - direct).norm() / direct.norm(),
                mat2::det(&direct).re,
                det_xk_closed(&t, k),
                b.smallest_singular_value,
                b.lower,
                b.norm,
                b.upper
            );
        }
    }
    let s = triangularize(&RMat::new(0.3, -1.0, 1.0, 0.0));
    println!("Schur form of (0.3, -1; 1, 0): xi = {:.6}, c = {:.6}", s.xi, s.c);
    Ok(())
}
