// The characteristic polynomial Δ(λ) of a random period-7 operator, computed
// from the monodromy and from totally disconnected subsets, and its branch
// points next to the Lax spectrum.
//
// ```bash
// cargo run --example spectral_curve
// ```

use volterra::invariants::lax_matrix;
use volterra::spectral::{delta_combinatorial, delta_from_monodromy, i_n_closed_form, spectral_curve};
use volterra::{PeriodicOperator, ToleranceConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let tol = ToleranceConfig::default();
    let op = PeriodicOperator::random(3, 42, 0.5, 2.0)?;
    println!("c = {:?}", op.c());

    let monodromy = delta_from_monodromy(&op, &tol)?;
    let subsets = delta_combinatorial(&op);
    println!("I (monodromy)     = {:?}", monodromy.coefficients());
    println!("I (combinatorial) = {:?}", subsets.coefficients());
    println!("max relative gap  = {:e}", monodromy.max_relative_diff(&subsets));
    println!("I_N closed form   = {} vs {}", i_n_closed_form(&op), subsets.coefficients()[op.n()]);

    let curve = spectral_curve(&subsets, &tol)?;
    curve.require_nonsingular(&tol)?;
    let lax = lax_matrix(&op).eigenvalues();
    println!("\n  Δ = 2 root      Lax eigenvalue");
    for (z, e) in curve.plus.iter().zip(&lax) {
        println!("  {:>14.10}  {:>14.10}", z.re, e);
    }
    println!("min separation {:.3e}, nonsingular {}", curve.min_separation, curve.nonsingular);

    // c ≡ 1 at T = 3 has Δ - 2 = (λ - 2)(λ + 1)², a double branch point
    let flat = PeriodicOperator::new(vec![1.0; 3])?;
    let err = spectral_curve(&delta_combinatorial(&flat), &tol)?.require_nonsingular(&tol).unwrap_err();
    println!("\nconstant lattice: {err}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
