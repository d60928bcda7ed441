//! Named property checks on a single operator, grouped into suites.

use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{commutativity_check, conservation_report, higher_rhs, integrate, volterra_rhs, StepControl};
use crate::invariants::{
    expand_log_delta, expand_log_rho_with, invariant_set, j_from_i, j_trace, lax_matrix, lemma_remainder,
    theorem_a_check, theorem_b_check,
};
use crate::lattice::{PeriodicOperator, ToleranceConfig};
use crate::poisson::{
    involution_scale, jacobi_defect, lenard_magri_check, random_gradients, random_lambdas, verify_annulator,
    verify_canonical, verify_involution, BracketKind, Gradient,
};
use crate::spectral::{
    delta_combinatorial, delta_from_monodromy, i_n_closed_form, spectral_curve, FloquetEvaluator,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    pub fn new(name: &str, max_residual: f64, tolerance: f64) -> Self {
        Self { name: name.to_string(), max_residual, tolerance, pass: max_residual <= tolerance }
    }

    /// Criterion number from the `NN_` name prefix.
    pub fn criterion(&self) -> usize {
        self.name[..2].parse().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Poisson,
    Spectral,
    Flows,
    Theorem,
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Suite::All),
            "poisson" => Ok(Suite::Poisson),
            "spectral" => Ok(Suite::Spectral),
            "flows" => Ok(Suite::Flows),
            "theorem" => Ok(Suite::Theorem),
            _ => Err(Error::InvalidInput(format!("unknown suite '{s}'"))),
        }
    }
}

impl Suite {
    /// Criterion numbers belonging to the suite.
    pub fn criteria(self) -> &'static [usize] {
        match self {
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15],
            Suite::Spectral => &[1, 2, 3, 15],
            Suite::Theorem => &[4, 5, 6, 11, 12],
            Suite::Poisson => &[7, 8, 9, 10, 14],
            Suite::Flows => &[13],
        }
    }
}

/// Pinned tolerances, multiplied by `scale` (1 for the defaults).
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub scale: f64,
    pub numerics: ToleranceConfig,
}

impl Tolerances {
    pub fn new(scale: f64, numerics: ToleranceConfig) -> Self {
        Self { scale, numerics }
    }

    /// Scale derived from an identity tolerance `τ`, relative to the default `1e-9`.
    pub fn from_identity_tolerance(tau: f64) -> Result<Self> {
        let numerics = ToleranceConfig { eq_tol: tau, ..ToleranceConfig::default() };
        numerics.validate()?;
        Ok(Self { scale: tau / ToleranceConfig::default().eq_tol, numerics })
    }

    fn t(&self, pinned: f64) -> f64 {
        pinned * self.scale
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { scale: 1.0, numerics: ToleranceConfig::default() }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn rel_strict(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Runs the checks of one criterion on `op`.
pub fn check_criterion(op: &PeriodicOperator, criterion: usize, tols: &Tolerances) -> Result<Vec<CheckResult>> {
    let tol = &tols.numerics;
    let n = op.n();
    let mut out = Vec::new();
    match criterion {
        1 => {
            let a = delta_from_monodromy(op, tol)?;
            let b = delta_combinatorial(op);
            out.push(CheckResult::new("01_delta_two_routes", a.max_relative_diff(&b), tols.t(1e-10)));
        }
        2 => {
            let b = delta_combinatorial(op);
            out.push(CheckResult::new("02_closed_form_i_n", rel_strict(i_n_closed_form(op), b.coefficients()[n]), tols.t(1e-10)));
        }
        3 => {
            let lax = lax_matrix(op);
            let eig = lax.eigenvalues();
            let curve = spectral_curve(&delta_combinatorial(op), tol)?;
            let dist = eig
                .iter()
                .zip(&curve.plus)
                .map(|(x, z)| (x - z.re).abs().max(z.im.abs()))
                .fold(0.0, f64::max);
            out.push(CheckResult::new("03_lax_eigenvalues", dist / lax.spectral_radius(), tols.t(1e-8)));
        }
        4 => {
            let s = expand_log_delta(&delta_combinatorial(op), 2 * n);
            let j = invariant_set(op).j;
            let worst = (0..=n).map(|k| rel(-s.even(k), j[k])).fold(0.0, f64::max);
            out.push(CheckResult::new("04_log_delta_expansion", worst, tols.t(1e-9)));
        }
        5 => {
            let d = delta_combinatorial(op);
            let mut worst: f64 = 0.0;
            for k in 1..=n {
                worst = worst.max(rel_strict(j_from_i(&d, k)?, j_trace(op, k)?));
            }
            out.push(CheckResult::new("05_newton_formula", worst, tols.t(1e-9)));
        }
        6 => {
            let ev = FloquetEvaluator::new(&delta_combinatorial(op), tol)?;
            let s = expand_log_rho_with(&ev, 2 * n)?;
            let j = invariant_set(op).j;
            let worst = (0..=n).map(|k| rel(s.even(k), j[k])).fold(0.0, f64::max);
            out.push(CheckResult::new("06a_log_rho_expansion", worst, tols.t(1e-6)));
            let r = lemma_remainder(&ev, 4)?;
            let ratio = r.windows(2).map(|w| (w[1].1 / w[0].1).abs()).fold(0.0, f64::max);
            out.push(CheckResult::new("06b_log_rho_remainder_decay", ratio, 0.75));
        }
        7 => {
            let r = verify_annulator(op)?;
            out.push(CheckResult::new("07_annulators", r.quadratic.max(r.cubic), tols.t(1e-10)));
        }
        8 => {
            let radius = 1.5 * lax_matrix(op).spectral_radius();
            let lambdas = random_lambdas(5, radius, 0x1a);
            let mut grads = random_gradients(op.period(), 10, 0x2b);
            grads.extend((0..op.period()).map(|i| Gradient::unit(op.period(), i)));
            let mut worst: f64 = 0.0;
            for g in &grads {
                let r = lenard_magri_check(op, g, &lambdas)?;
                worst = worst.max(r.max_chain()).max(r.generating);
            }
            out.push(CheckResult::new("08_lenard_magri", worst, tols.t(1e-9)));
        }
        9 => {
            let scale = involution_scale(op, tol)?;
            let mut worst: f64 = 0.0;
            for kind in BracketKind::ALL {
                worst = worst.max(verify_involution(op, kind, tol)? / scale);
            }
            out.push(CheckResult::new("09_involution", worst, tols.t(1e-7)));
        }
        10 => {
            let limit = tols.t(1e-5);
            let mut worst: f64 = 0.0;
            for kind in BracketKind::ALL {
                match verify_canonical(op, kind, limit, false, tol) {
                    Ok(r) => worst = worst.max(r.qp_defect).max(r.pp_defect),
                    Err(Error::CanonicityFailure(_)) => worst = f64::INFINITY,
                    Err(e) => return Err(e),
                }
            }
            out.push(CheckResult::new("10_canonical_coordinates", worst, limit));
        }
        11 => {
            let mut worst: f64 = 0.0;
            for kind in BracketKind::ALL {
                worst = worst.max(theorem_a_check(op, kind, tol)?.max_relative_error);
            }
            out.push(CheckResult::new("11_theorem_a_hamiltonians", worst, tols.t(1e-6)));
        }
        12 => {
            let d = delta_combinatorial(op);
            let (mut dev, mut cond, mut sigma): (f64, f64, f64) = (0.0, 0.0, 0.0);
            for kind in BracketKind::ALL {
                let r = theorem_b_check(&d, kind, None, tol)?;
                dev = dev.max(r.max_relative_deviation);
                cond = cond.max(r.rank_condition);
                sigma = sigma.max(r.sigma_defect);
            }
            out.push(CheckResult::new("12a_theorem_b_differentials", dev, tols.t(1e-6)));
            out.push(CheckResult::new("12b_theorem_b_rank", cond, 1e8));
            out.push(CheckResult::new("12c_theorem_b_sigma_symmetry", sigma, tols.t(1e-6)));
        }
        13 => out.extend(flow_checks(op, tols)?),
        14 => {
            let worst = BracketKind::ALL.iter().map(|k| jacobi_defect(*k, op.c())).fold(0.0, f64::max);
            out.push(CheckResult::new("14_jacobi_identity", worst, tols.t(1e-12)));
        }
        15 => {
            let flat = PeriodicOperator::new(vec![1.0; 3])?;
            let curve = spectral_curve(&delta_combinatorial(&flat), tol)?;
            let flagged = !curve.nonsingular
                && matches!(curve.require_nonsingular(tol), Err(e @ Error::SingularCurve { .. }) if e.exit_code() == 3);
            out.push(CheckResult::new("15_degenerate_detection", if flagged { 0.0 } else { 1.0 }, 0.0));
        }
        _ => return Err(Error::OutOfRange(format!("criterion {criterion}"))),
    }
    Ok(out)
}

fn flow_checks(op: &PeriodicOperator, tols: &Tolerances) -> Result<Vec<CheckResult>> {
    let n = op.n();
    let t = op.period();
    let mut out = Vec::new();
    let rhs_defect = higher_rhs(op, 1)?
        .iter()
        .zip(volterra_rhs(op.c()))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.push(CheckResult::new("13a_first_flow_is_volterra", rhs_defect, 0.0));

    // Outside the window the component must not move at all; on its edge it must.
    let mut outside: f64 = 0.0;
    let mut edge_dead = 0usize;
    for k in 1..=n.min(3) {
        let base = higher_rhs(op, k)?;
        for j in 0..t {
            let moved = higher_rhs(&op.perturb(j, 0.1 * op.c()[j])?, k)?;
            for i in 0..t {
                let d = (i + t - j) % t;
                let dist = d.min(t - d);
                if dist > k {
                    outside = outside.max((moved[i] - base[i]).abs());
                } else if dist == k && moved[i] == base[i] && 2 * k < t {
                    edge_dead += 1;
                }
            }
        }
    }
    out.push(CheckResult::new("13b_flow_locality", outside + edge_dead as f64, 0.0));

    let traj = integrate(op, 1, 10.0, &StepControl::default())?;
    let report = conservation_report(&traj, op)?;
    out.push(CheckResult::new("13c_invariant_drift", report.max_i_drift(), tols.t(1e-7)));

    if n >= 2 {
        let r = commutativity_check(op, 1, 2, 1e-3)?;
        out.push(CheckResult::new("13d_commutativity_order", (r.ratio.log2() - 3.0).abs(), 1.0));
    }
    Ok(out)
}

/// Runs every criterion of a suite, sorted by check name. Fails early with the
/// numerical error if the operator's spectral curve is singular.
pub fn run_suite(op: &PeriodicOperator, suite: Suite, tols: &Tolerances) -> Result<Vec<CheckResult>> {
    spectral_curve(&delta_combinatorial(op), &tols.numerics)?.require_nonsingular(&tols.numerics)?;
    let mut out = Vec::new();
    for &c in suite.criteria() {
        out.extend(check_criterion(op, c, tols)?);
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

/// Spectral summary written by the `spectrum` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    #[serde(rename = "T")]
    pub period: usize,
    #[serde(rename = "I")]
    pub i: Vec<f64>,
    pub branch_points_plus: Vec<[f64; 2]>,
    pub branch_points_minus: Vec<[f64; 2]>,
    pub nonsingular: bool,
    pub min_separation: f64,
    pub dirichlet: Vec<f64>,
    /// Floquet multiplier at each Dirichlet point as `[re, im]`.
    pub rho: Vec<[f64; 2]>,
    /// `+1` for the sheet where `ρ → ∞` at `+∞`, `-1` otherwise.
    pub sheet: Vec<i8>,
    pub lax_eigenvalues: Vec<f64>,
}

pub fn spectrum_report(op: &PeriodicOperator, tol: &ToleranceConfig) -> Result<SpectrumReport> {
    let delta = delta_from_monodromy(op, tol)?;
    let curve = spectral_curve(&delta, tol)?;
    let pairs = |v: &[num_complex::Complex64]| v.iter().map(|z| [z.re, z.im]).collect();
    let dirichlet = crate::spectral::dirichlet_spectrum(op, tol)?;
    let ev = FloquetEvaluator::with_curve(&delta, curve.clone(), tol);
    let divisor = crate::spectral::resolve_with(op, &ev, &dirichlet)?;
    Ok(SpectrumReport {
        period: op.period(),
        i: delta.coefficients().to_vec(),
        branch_points_plus: pairs(&curve.plus),
        branch_points_minus: pairs(&curve.minus),
        nonsingular: curve.nonsingular,
        min_separation: curve.min_separation,
        dirichlet: dirichlet.values.clone(),
        rho: divisor.rho.iter().map(|&r| [r, 0.0]).collect(),
        sheet: divisor.sheet.iter().map(|s| s.sign() as i8).collect(),
        lax_eigenvalues: lax_matrix(op).eigenvalues(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantsReport {
    #[serde(rename = "T")]
    pub period: usize,
    #[serde(rename = "I")]
    pub i: Vec<f64>,
    /// `J_0..J_N` from traces of the Lax matrix.
    #[serde(rename = "J")]
    pub j: Vec<f64>,
    /// `J_1..J_N` from the coefficients of `Δ`.
    #[serde(rename = "J_from_I")]
    pub j_from_i: Vec<f64>,
    /// Coefficients of `λ^{-p}` in `ln Δ - (2N+1) ln λ`, `p = 0..=2N`.
    #[serde(rename = "lnDelta_coeffs")]
    pub ln_delta: Vec<f64>,
    /// Coefficients of `λ^{-p}` in `ln ρ + (2N+1) ln λ` at `P_-`, `p = 0..=2N`.
    #[serde(rename = "lnRho_coeffs")]
    pub ln_rho: Vec<f64>,
}

pub fn invariants_report(op: &PeriodicOperator, tol: &ToleranceConfig) -> Result<InvariantsReport> {
    let d = delta_combinatorial(op);
    let order = 2 * op.n();
    let ev = FloquetEvaluator::new(&d, tol)?;
    Ok(InvariantsReport {
        period: op.period(),
        i: d.coefficients().to_vec(),
        j: invariant_set(op).j,
        j_from_i: (1..=op.n()).map(|k| j_from_i(&d, k)).collect::<Result<_>>()?,
        ln_delta: expand_log_delta(&d, order).coefficients,
        ln_rho: expand_log_rho_with(&ev, order)?.coefficients,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub order: usize,
    /// Coefficients of `λ^{-p}` in `ln Δ - (2N+1) ln λ`, `p = 0..=order`.
    pub log_delta: Vec<f64>,
    /// Coefficients of `λ^{-p}` in `ln ρ + (2N+1) ln λ` at `P_-`.
    pub log_rho: Vec<f64>,
    pub fit_condition: f64,
    pub fit_consistency: f64,
    /// `J_0..J_N` for comparison.
    pub j: Vec<f64>,
}

pub fn expansion_report(op: &PeriodicOperator, order: usize, tol: &ToleranceConfig) -> Result<ExpansionReport> {
    if order == 0 {
        return Err(Error::InvalidInput("order must be positive".into()));
    }
    let d = delta_combinatorial(op);
    let ev = FloquetEvaluator::new(&d, tol)?;
    let rho = expand_log_rho_with(&ev, order)?;
    Ok(ExpansionReport {
        order,
        log_delta: expand_log_delta(&d, order).coefficients,
        log_rho: rho.coefficients,
        fit_condition: rho.condition,
        fit_consistency: rho.consistency,
        j: invariant_set(op).j,
    })
}

/// Condition number of a real matrix from its singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_parsing() {
        assert_eq!("poisson".parse::<Suite>().unwrap(), Suite::Poisson);
        assert!("nope".parse::<Suite>().is_err());
        let mut all: Vec<usize> = [Suite::Spectral, Suite::Theorem, Suite::Poisson, Suite::Flows]
            .iter()
            .flat_map(|s| s.criteria().iter().copied())
            .collect();
        all.sort();
        assert_eq!(all, Suite::All.criteria());
    }

    #[test]
    fn all_checks_pass_on_small_operator() {
        let op = PeriodicOperator::random(2, 1, 0.5, 2.0).unwrap();
        let r = run_suite(&op, Suite::All, &Tolerances::default()).unwrap();
        for c in &r {
            assert!(c.pass, "{c:?}");
        }
        assert!(r.windows(2).all(|w| w[0].name < w[1].name));
        assert_eq!(r.iter().map(|c| c.criterion()).max(), Some(15));
    }

    #[test]
    fn singular_input_is_numerical_failure() {
        let op = PeriodicOperator::new(vec![1.0; 3]).unwrap();
        let e = run_suite(&op, Suite::Spectral, &Tolerances::default()).unwrap_err();
        assert_eq!(e.kind(), "SingularCurve");
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn tolerance_scaling() {
        let t = Tolerances::from_identity_tolerance(1e-8).unwrap();
        assert!((t.t(1e-10) - 1e-9).abs() < 1e-24);
        assert!(Tolerances::from_identity_tolerance(-1.0).is_err());
    }
}
