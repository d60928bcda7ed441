// Runs the full property suite on an operator read back from its JSON file
// format and prints the per-check table.

use volterra::verify::{run_suite, Suite, Tolerances};
use volterra::PeriodicOperator;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let op = PeriodicOperator::random(2, 1, 0.5, 2.0)?;
    let text = op.to_json();
    println!("{text}");
    let op = PeriodicOperator::from_json(&text)?;

    let checks = run_suite(&op, Suite::All, &Tolerances::default())?;
    for c in &checks {
        let mark = if c.pass { "ok" } else { "FAIL" };
        println!("{:<34} {:>10.2e} <= {:<8.0e} {mark}", c.name, c.max_residual, c.tolerance);
    }
    if checks.iter().any(|c| !c.pass) {
        return Err("some checks failed".into());
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
