// Dirichlet spectrum, Floquet multipliers and the sheet of each divisor point,
// with the multiplier checked against the monodromy eigenvector.

use volterra::spectral::{delta_combinatorial, dirichlet_spectrum, monodromy_at, resolve_divisor_sheets};
use volterra::{PeriodicOperator, ToleranceConfig};
use num_complex::Complex64;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let tol = ToleranceConfig::default();
    let op = PeriodicOperator::random(2, 7, 0.5, 2.0)?;
    let spec = dirichlet_spectrum(&op, &tol)?;
    println!("Dirichlet eigenvalues {:?}", spec.values);

    let divisor = resolve_divisor_sheets(&op, &delta_combinatorial(&op), &spec, &tol)?;
    println!("{:>12} {:>14} {:>6} {:>10}", "λ_k", "ρ_k", "sheet", "residual");
    for k in 0..divisor.lambda.len() {
        println!(
            "{:>12.8} {:>14.8} {:>6} {:>10.2e}",
            divisor.lambda[k],
            divisor.rho[k],
            format!("{:?}", divisor.sheet[k]),
            divisor.residual[k]
        );
    }

    // at a Dirichlet point (0, 1) is an eigenvector of M, so m01 vanishes
    let m = monodromy_at(&op, Complex64::new(divisor.lambda[0], 0.0));
    println!("m01 at λ_1 = {:e}, m11 = {}", m[0][1].norm(), m[1][1].re);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
