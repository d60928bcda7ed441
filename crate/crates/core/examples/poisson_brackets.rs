// The quadratic and cubic brackets on the weights: annulators, Jacobi
// identity, involution of the integrals and the Lenard–Magri chain
// `{I_k, f}_2 = -{I_{k+1}, f}_1`.

use volterra::poisson::{
    bracket_eval, grad_i, jacobi_defect, lenard_magri_check, random_gradients, verify_annulator,
};
use volterra::{BracketKind, PeriodicOperator};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let op = PeriodicOperator::random(2, 3, 0.5, 2.0)?;

    let ann = verify_annulator(&op)?;
    println!("annulators: I_0 for the quadratic bracket {:.1e}, I_N for the cubic {:.1e}", ann.quadratic, ann.cubic);

    for kind in BracketKind::ALL {
        println!("Jacobi defect ({}) {:.1e}", kind.name(), jacobi_defect(kind, op.c()));
    }

    let grads: Vec<_> = (0..=op.n()).map(|k| grad_i(&op, k)).collect::<Result<_, _>>()?;
    for kind in BracketKind::ALL {
        let mut worst: f64 = 0.0;
        for a in &grads {
            for b in &grads {
                worst = worst.max(bracket_eval(kind, a, b, op.c())?.abs());
            }
        }
        println!("max |{{I_j, I_k}}| ({}) {:.1e}", kind.name(), worst);
    }

    let f = &random_gradients(op.period(), 1, 9)[0];
    let report = lenard_magri_check(&op, f, &[0.3, 1.7, -2.4])?;
    println!("Lenard–Magri chain residuals {:?}", report.chain);
    println!("{{Δ,f}}_2 - λ²{{Δ,f}}_1: {:.1e}", report.generating);
    println!("exchanged form, not an identity: {:.1e}", report.generating_exchanged);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
