// Both parts of the theorem on algebro-geometric brackets. Part (a): the
// coefficients of ln ρ at infinity are the Hamiltonians 2J_k (quadratic) and
// 2J_{k-1} (cubic). Part (b): along the annulator level set the derivatives
// of the Abel-type form are the holomorphic differentials ±λ^e dλ / y.

use volterra::invariants::{theorem_a_check, theorem_b_check};
use volterra::spectral::delta_combinatorial;
use volterra::{BracketKind, PeriodicOperator, ToleranceConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let tol = ToleranceConfig::default();
    let op = PeriodicOperator::random(3, 21, 0.5, 2.0)?;
    let delta = delta_combinatorial(&op);
    for kind in BracketKind::ALL {
        let a = theorem_a_check(&op, kind, &tol)?;
        println!("{} bracket", kind.name());
        println!("  fitted   {:?}", a.fitted);
        println!("  expected {:?}", a.expected);
        println!("  relative error {:.1e} (fit condition {:.2})", a.max_relative_error, a.condition);

        let b = theorem_b_check(&delta, kind, None, &tol)?;
        println!(
            "  differentials along I_{:?}: deviation {:.1e}, σ-defect {:.1e}, rank condition {:.2e} over {} samples",
            b.directions, b.max_relative_deviation, b.sigma_defect, b.rank_condition, b.samples
        );
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
