// Divisor coordinates q_k = λ_k, p_k = 2 ln|ρ_k| / λ_k^m are canonical for
// both brackets (m = 1 quadratic, m = 3 cubic). Moving a point to the other
// sheet flips the sign of p_k without changing the brackets.

use volterra::poisson::verify_canonical;
use volterra::{BracketKind, PeriodicOperator, ToleranceConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let tol = ToleranceConfig::default();
    let op = PeriodicOperator::random(3, 5, 0.5, 2.0)?;
    for kind in BracketKind::ALL {
        let r = verify_canonical(&op, kind, 1e-6, true, &tol)?;
        println!("{} bracket", kind.name());
        println!("  q = {:?}", r.chart.q);
        println!("  p = {:?}", r.chart.p);
        println!("  {{q,p}} - 1 = {:.1e}, {{p,p}} = {:.1e}", r.qp_defect, r.pp_defect);
        println!("  analytic vs finite-difference ∇p: {:.1e}", r.fd_agreement);
        println!("  λ_k (p_k + p_k') on the mirror chart: {:?}", r.mirror_shift);
        for row in &r.qp {
            println!("    {}", row.iter().map(|v| format!("{v:>10.6}")).collect::<Vec<_>>().join(" "));
        }
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
