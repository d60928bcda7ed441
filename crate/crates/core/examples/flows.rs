// The Volterra flow and its higher analogues: RK4 integration with step
// halving, conservation of the spectral data, and commutativity of two flows.

use volterra::flows::{commutativity_check, conservation_report, integrate, StepControl};
use volterra::PeriodicOperator;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let op = PeriodicOperator::random(2, 13, 0.5, 2.0)?;
    for k in 1..=op.n() {
        let traj = integrate(&op, k, 2.0, &StepControl::default())?;
        let drift = conservation_report(&traj, &op)?;
        println!(
            "flow {k}: {} steps, I drift {:.1e}, J drift {:.1e}, Dirichlet points moved by up to {:.3}",
            traj.steps,
            drift.max_i_drift(),
            drift.max_j_drift(),
            drift.dirichlet_variation.iter().copied().fold(0.0, f64::max)
        );
        println!("  c(2) = {:?}", traj.end());
    }

    let r = commutativity_check(&op, 1, 2, 1e-2)?;
    println!(
        "[X_1, X_2]: commutator residual {:.2e} -> {:.2e} at eps/2 (ratio {:.2}), Lie bracket {:.1e}",
        r.residual, r.residual_half, r.ratio, r.lie_bracket
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
