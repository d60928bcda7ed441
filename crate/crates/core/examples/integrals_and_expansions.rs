// The integrals J_k = tr L^{2k} / 2k three ways: Lax traces, the Newton-type
// sum over the coefficients of Δ, and the expansions of ln Δ and ln ρ at
// infinity. Also prints the remainder of the truncated ln ρ series.

use volterra::invariants::{expand_log_delta, expand_log_rho_with, invariant_set, j_from_i, lemma_remainder};
use volterra::spectral::{delta_combinatorial, FloquetEvaluator};
use volterra::{PeriodicOperator, ToleranceConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let tol = ToleranceConfig::default();
    let op = PeriodicOperator::random(3, 11, 0.5, 2.0)?;
    let n = op.n();
    let delta = delta_combinatorial(&op);
    let ev = FloquetEvaluator::new(&delta, &tol)?;

    let j = invariant_set(&op).j;
    let log_delta = expand_log_delta(&delta, 2 * n);
    let log_rho = expand_log_rho_with(&ev, 2 * n)?;
    println!("fit condition {:.3}, consistency {:.1e}", log_rho.condition, log_rho.consistency);
    println!("{:>3} {:>18} {:>18} {:>18} {:>18}", "k", "trace", "from I", "-[ln Δ]", "[ln ρ]");
    for (k, jk) in j.iter().enumerate() {
        let newton = if k == 0 { f64::NAN } else { j_from_i(&delta, k)? };
        println!("{k:>3} {jk:>18.12} {newton:>18.12} {:>18.12} {:>18.12}", -log_delta.even(k), log_rho.even(k));
    }

    println!("\nremainder of the ln ρ series at growing |λ|:");
    for (r, d) in lemma_remainder(&ev, 4)? {
        println!("  |λ| = {r:>8.3}  |D| = {d:.3e}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
