//! P_k accumulation, the variational determinant, and the chain
//! mass <= 2 eps Im M(E + i eps) <= C eps^2 ||P_k|| against a truncated operator.

use qpspec::cocycle::SchrodingerCocycle;
use qpspec::holder::nearest_eigenvalue;
use qpspec::torus::{FrequencyVector, TorusSeries};
use qpspec::weyl::{accumulate_pk, chain_at, det_via_solutions, write_oracle_csv, TruncatedOperator};

fn main() -> qpspec::Result<()> {
    let base = SchrodingerCocycle::new(FrequencyVector::golden(), TorusSeries::cos_sum(1), 0.1, 0.0)?;
    let theta = [0.0];

    let sc = base.at_energy(0.4);
    let acc = accumulate_pk(&sc, &theta, 25)?;
    let det = det_via_solutions(&sc, &theta, 25, 7200);
    println!("det P_25 = {:.8}, from solutions {:.8}, eps_25 = {:.6}", acc.det_p, det, acc.eps_k);

    let op = TruncatedOperator::new(&base, &theta, 10_000);
    let mut rows = Vec::new();
    for target in [-1.5, -0.5, 0.0, 0.7, 1.6] {
        let e = nearest_eigenvalue(&op, target);
        for k in [20, 50, 200] {
            let rep = chain_at(&op, &accumulate_pk(&base.at_energy(e), &theta, k)?)?;
            eprintln!("E={e:.5} k={k:>3} holds={} flagged={}", rep.holds(), rep.flagged);
            rows.push(rep.row());
        }
    }
    write_oracle_csv(&rows, std::io::stdout().lock())
}
