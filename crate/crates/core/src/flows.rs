//! The Volterra flow `ċ_i = c_i(c_{i+1} - c_{i-1})`, its higher commuting flows
//! `ċ_i = {c_i, J_k}_1`, and fixed-step RK4 integration with step doubling.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::invariants::invariant_set;
use crate::lattice::{PeriodicOperator, ToleranceConfig};
use crate::poisson::{grad_j, structure_matrix, BracketKind};
use crate::spectral::{delta_combinatorial, delta_from_monodromy, dirichlet_spectrum};

pub fn volterra_rhs(c: &[f64]) -> Vec<f64> {
    let t = c.len();
    (0..t).map(|i| c[i] * (c[(i + 1) % t] - c[(i + t - 1) % t])).collect()
}

/// `ċ_i = c_i (c_{i+1} g_{i+1} - c_{i-1} g_{i-1})` with `g = ∇J_k`.
pub fn higher_rhs(op: &PeriodicOperator, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > op.n() {
        return Err(Error::OutOfRange(format!("flow index {k} outside 1..={}", op.n())));
    }
    let g = grad_j(op, k)?.0;
    let c = op.c();
    let t = c.len();
    Ok((0..t)
        .map(|i| {
            let (up, down) = ((i + 1) % t, (i + t - 1) % t);
            c[i] * (c[up] * g[up] - c[down] * g[down])
        })
        .collect())
}

/// The same flow through the cubic bracket, `ċ_i = {c_i, J_{k-1}}_2`.
pub fn higher_rhs_cubic(op: &PeriodicOperator, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > op.n() {
        return Err(Error::OutOfRange(format!("flow index {k} outside 1..={}", op.n())));
    }
    let g = grad_j(op, k - 1)?.0;
    let p = structure_matrix(BracketKind::Cubic, op.c());
    Ok((0..op.period()).map(|i| (0..op.period()).map(|j| p[(i, j)] * g[j]).sum()).collect())
}

fn rhs(c: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 1 {
        return Ok(volterra_rhs(c));
    }
    higher_rhs(&PeriodicOperator::new(c.to_vec())?, k)
}

fn axpy(c: &[f64], h: f64, d: &[f64]) -> Vec<f64> {
    c.iter().zip(d).map(|(x, y)| x + h * y).collect()
}

fn check_positive(c: &[f64], t: f64) -> Result<()> {
    match c.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        Some((index, &value)) => Err(Error::PositivityLoss { index, value, t }),
        None => Ok(()),
    }
}

fn rk4_step(c: &[f64], k: usize, h: f64, t: f64) -> Result<Vec<f64>> {
    let guard = |x: Vec<f64>| -> Result<Vec<f64>> {
        check_positive(&x, t)?;
        Ok(x)
    };
    let k1 = rhs(c, k)?;
    let k2 = rhs(&guard(axpy(c, h / 2.0, &k1))?, k)?;
    let k3 = rhs(&guard(axpy(c, h / 2.0, &k2))?, k)?;
    let k4 = rhs(&guard(axpy(c, h, &k3))?, k)?;
    Ok(c.iter()
        .enumerate()
        .map(|(i, x)| x + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// `steps` RK4 steps of flow `k` over time `t` (either sign); returns every state.
pub fn flow_map(c: &[f64], k: usize, t: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
    let h = t / steps as f64;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(c.to_vec());
    for s in 0..steps {
        let next = rk4_step(&states[s], k, h, (s + 1) as f64 * h)?;
        check_positive(&next, (s + 1) as f64 * h)?;
        states.push(next);
    }
    Ok(states)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub initial_steps: usize,
    /// Relative endpoint change between successive step doublings that ends the loop.
    pub tolerance: f64,
    pub max_halvings: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { initial_steps: 64, tolerance: 1e-8, max_halvings: 12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub flow: usize,
    pub steps: usize,
    /// Relative endpoint change at the last halving.
    pub error_estimate: f64,
}

impl Trajectory {
    pub fn end(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one state")
    }

    /// Header `t,c_1,…,c_T`, one row per time.
    pub fn to_csv(&self) -> String {
        let t = self.states[0].len();
        let mut out = String::from("t");
        for i in 1..=t {
            let _ = write!(out, ",c_{i}");
        }
        out.push('\n');
        for (time, state) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{time}");
            for v in state {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn relative_change(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|x| x.abs()).fold(0.0, f64::max);
    diff / scale.max(f64::MIN_POSITIVE)
}

/// RK4 with the step halved until the endpoint moves by less than the tolerance.
pub fn integrate(op: &PeriodicOperator, k: usize, t_end: f64, control: &StepControl) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("t_end = {t_end} must be positive")));
    }
    if k == 0 || k > op.n() {
        return Err(Error::OutOfRange(format!("flow index {k} outside 1..={}", op.n())));
    }
    let mut steps = control.initial_steps.max(1);
    let mut previous = flow_map(op.c(), k, t_end, steps)?;
    for _ in 0..control.max_halvings {
        steps *= 2;
        let states = flow_map(op.c(), k, t_end, steps)?;
        let change = relative_change(states.last().unwrap(), previous.last().unwrap());
        if change < control.tolerance {
            let times = (0..=steps).map(|s| t_end * s as f64 / steps as f64).collect();
            return Ok(Trajectory { times, states, flow: k, steps, error_estimate: change });
        }
        previous = states;
    }
    Err(Error::StepLimitExceeded(control.max_halvings))
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutativityReport {
    pub k: usize,
    pub l: usize,
    pub eps: f64,
    /// `|E_k(ε) E_l(ε) c - E_l(ε) E_k(ε) c|` for explicit Euler steps `E`.
    pub residual: f64,
    pub residual_half: f64,
    /// `residual / residual_half`, about 8 when the vector fields commute.
    pub ratio: f64,
    /// The same composition defect with converged RK4 flow maps, relative to `ε`.
    pub flow_residual: f64,
    /// `|[X_k, X_l]| / (|X_k| |X_l|)` with central differences.
    pub lie_bracket: f64,
}

fn euler(c: &[f64], k: usize, eps: f64) -> Result<Vec<f64>> {
    Ok(axpy(c, eps, &rhs(c, k)?))
}

fn composition_defect(c: &[f64], k: usize, l: usize, eps: f64) -> Result<f64> {
    let kl = euler(&euler(c, l, eps)?, k, eps)?;
    let lk = euler(&euler(c, k, eps)?, l, eps)?;
    Ok(kl.iter().zip(&lk).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Compares the two orders of composition of flows `k` and `l` over time `eps`.
pub fn commutativity_check(op: &PeriodicOperator, k: usize, l: usize, eps: f64) -> Result<CommutativityReport> {
    for f in [k, l] {
        if f == 0 || f > op.n() {
            return Err(Error::OutOfRange(format!("flow index {f} outside 1..={}", op.n())));
        }
    }
    let c = op.c();
    let residual = composition_defect(c, k, l, eps)?;
    let residual_half = composition_defect(c, k, l, eps / 2.0)?;
    let ratio = if k == l { f64::NAN } else { residual / residual_half };

    let steps = 16;
    let kl = flow_map(flow_map(c, l, eps, steps)?.last().unwrap(), k, eps, steps)?;
    let lk = flow_map(flow_map(c, k, eps, steps)?.last().unwrap(), l, eps, steps)?;
    let flow_residual = relative_change(kl.last().unwrap(), lk.last().unwrap()) / eps;

    let (xk, xl) = (rhs(c, k)?, rhs(c, l)?);
    let h = 1e-5;
    let directional = |field: usize, dir: &[f64]| -> Result<Vec<f64>> {
        let plus = rhs(&axpy(c, h, dir), field)?;
        let minus = rhs(&axpy(c, -h, dir), field)?;
        Ok(plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * h)).collect())
    };
    let a = directional(k, &xl)?;
    let b = directional(l, &xk)?;
    let bracket: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let lie_bracket = norm(&bracket) / (norm(&xk) * norm(&xl)).max(f64::MIN_POSITIVE);

    Ok(CommutativityReport { k, l, eps, residual, residual_half, ratio, flow_residual, lie_bracket })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservationReport {
    pub flow: usize,
    pub steps: usize,
    /// Max relative drift of `I_0..I_N`.
    pub i_drift: Vec<f64>,
    /// Max drift of `J_0..J_N`, relative to `max(|J|, 1)`.
    pub j_drift: Vec<f64>,
    pub delta_probe: f64,
    /// Max relative drift of `Δ(λ*)`.
    pub delta_drift: f64,
    /// Variation of each Dirichlet eigenvalue; these are not conserved.
    pub dirichlet_variation: Vec<f64>,
}

impl ConservationReport {
    pub fn max_i_drift(&self) -> f64 {
        self.i_drift.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_j_drift(&self) -> f64 {
        self.j_drift.iter().copied().fold(0.0, f64::max)
    }
}

/// Drift of the spectral invariants along a trajectory.
pub fn conservation_report(traj: &Trajectory, op: &PeriodicOperator) -> Result<ConservationReport> {
    let tol = ToleranceConfig::default();
    let d0 = delta_combinatorial(op);
    let j0 = invariant_set(op).j;
    let lam = 0.5 + op.c().iter().sum::<f64>() / op.period() as f64;
    let probe0 = d0.eval(lam);
    let spec0 = dirichlet_spectrum(op, &tol).map(|s| s.values).unwrap_or_default();
    let n = op.n();
    let mut report = ConservationReport {
        flow: traj.flow,
        steps: traj.steps,
        i_drift: vec![0.0; n + 1],
        j_drift: vec![0.0; n + 1],
        delta_probe: lam,
        delta_drift: 0.0,
        dirichlet_variation: vec![0.0; spec0.len()],
    };
    for state in &traj.states {
        let now = PeriodicOperator::new(state.clone())?;
        let d = delta_from_monodromy(&now, &tol)?;
        for (k, (a, b)) in d.coefficients().iter().zip(d0.coefficients()).enumerate() {
            report.i_drift[k] = report.i_drift[k].max((a - b).abs() / b.abs());
        }
        for (k, (a, b)) in invariant_set(&now).j.iter().zip(&j0).enumerate() {
            report.j_drift[k] = report.j_drift[k].max((a - b).abs() / b.abs().max(1.0));
        }
        report.delta_drift = report.delta_drift.max((d.eval(lam) - probe0).abs() / probe0.abs().max(1.0));
        if let Ok(spec) = dirichlet_spectrum(&now, &tol) {
            for (k, (a, b)) in spec.values.iter().zip(&spec0).enumerate() {
                report.dirichlet_variation[k] = report.dirichlet_variation[k].max((a - b).abs());
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volterra_by_hand() {
        assert_eq!(volterra_rhs(&[1.0, 2.0, 3.0]), vec![-1.0, 4.0, -3.0]);
        assert_eq!(volterra_rhs(&[1.5; 5]), vec![0.0; 5]);
    }

    #[test]
    fn first_flow_is_volterra() {
        let op = PeriodicOperator::random(3, 2, 0.5, 2.0).unwrap();
        assert_eq!(higher_rhs(&op, 1).unwrap(), volterra_rhs(op.c()));
        assert!(higher_rhs(&op, 0).is_err() && higher_rhs(&op, 4).is_err());
    }

    #[test]
    fn divergence_identity() {
        let op = PeriodicOperator::random(4, 3, 0.5, 2.0).unwrap();
        for k in 1..=4 {
            let r = higher_rhs(&op, k).unwrap();
            let s: f64 = r.iter().zip(op.c()).map(|(x, c)| x / c).sum();
            let scale: f64 = r.iter().zip(op.c()).map(|(x, c)| (x / c).abs()).sum();
            assert!(s.abs() < 1e-13 * scale.max(1.0));
        }
    }

    #[test]
    fn bihamiltonian_routes_agree() {
        let op = PeriodicOperator::random(3, 5, 0.5, 2.0).unwrap();
        for k in 1..=3 {
            let a = higher_rhs(&op, k).unwrap();
            let b = higher_rhs_cubic(&op, k).unwrap();
            let scale = a.iter().map(|x| x.abs()).fold(0.0, f64::max);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9 * scale, "k = {k}: {a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn locality_radius() {
        let op = PeriodicOperator::random(5, 6, 0.5, 2.0).unwrap();
        let t = op.period();
        for k in 1..=3 {
            let base = higher_rhs(&op, k).unwrap();
            for j in 0..t {
                let moved = higher_rhs(&op.perturb(j, 0.25).unwrap(), k).unwrap();
                for i in 0..t {
                    let dist = (i as isize - j as isize).rem_euclid(t as isize).min((j as isize - i as isize).rem_euclid(t as isize));
                    if dist as usize > k {
                        assert_eq!(moved[i], base[i], "k = {k}, i = {i}, j = {j}");
                    } else if dist as usize == k {
                        assert_ne!(moved[i], base[i], "k = {k}, i = {i}, j = {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn constant_lattice_is_fixed() {
        let op = PeriodicOperator::new(vec![1.2; 5]).unwrap();
        for k in 1..=2 {
            let traj = integrate(&op, k, 1.0, &StepControl::default()).unwrap();
            for s in &traj.states {
                for v in s {
                    assert!((v - 1.2).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn conservation_and_reversal() {
        let op = PeriodicOperator::random(3, 7, 0.5, 2.0).unwrap();
        let traj = integrate(&op, 1, 10.0, &StepControl::default()).unwrap();
        let r = conservation_report(&traj, &op).unwrap();
        assert!(r.max_i_drift() < 1e-7 && r.max_j_drift() < 1e-7 && r.delta_drift < 1e-7, "{r:?}");
        assert!(r.dirichlet_variation.iter().any(|v| *v > 1e-3));
        let back = flow_map(traj.end(), 1, -10.0, traj.steps).unwrap();
        let err = relative_change(back.last().unwrap(), op.c());
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn higher_flow_conserves() {
        let op = PeriodicOperator::random(2, 8, 0.5, 2.0).unwrap();
        let traj = integrate(&op, 2, 2.0, &StepControl::default()).unwrap();
        let r = conservation_report(&traj, &op).unwrap();
        assert!(r.max_i_drift() < 1e-7, "{r:?}");
    }

    #[test]
    fn step_limit_and_bad_input() {
        let op = PeriodicOperator::random(2, 8, 0.5, 2.0).unwrap();
        let tight = StepControl { initial_steps: 2, tolerance: 1e-30, max_halvings: 2 };
        assert!(matches!(integrate(&op, 1, 1.0, &tight), Err(Error::StepLimitExceeded(2))));
        assert!(matches!(integrate(&op, 1, -1.0, &StepControl::default()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn positivity_loss_is_reported() {
        let op = PeriodicOperator::new(vec![0.01, 3.0, 0.01, 3.0, 0.02]).unwrap();
        let coarse = StepControl { initial_steps: 1, tolerance: 1e-8, max_halvings: 0 };
        assert!(matches!(integrate(&op, 1, 5.0, &coarse), Err(Error::PositivityLoss { .. } | Error::StepLimitExceeded(_))));
        assert!(matches!(flow_map(op.c(), 1, 5.0, 1), Err(Error::PositivityLoss { .. })));
    }

    #[test]
    fn flows_commute() {
        let op = PeriodicOperator::random(2, 9, 0.5, 2.0).unwrap();
        let r = commutativity_check(&op, 1, 2, 1e-3).unwrap();
        assert!((4.0..=16.0).contains(&r.ratio), "{r:?}");
        assert!(r.lie_bracket < 1e-6 && r.flow_residual < 1e-6, "{r:?}");
        let same = commutativity_check(&op, 2, 2, 1e-3).unwrap();
        assert_eq!(same.residual, 0.0);
    }

    #[test]
    fn csv_layout() {
        let op = PeriodicOperator::new(vec![1.0, 2.0, 3.0]).unwrap();
        let traj = Trajectory { times: vec![0.0, 0.5], states: vec![op.c().to_vec(); 2], flow: 1, steps: 1, error_estimate: 0.0 };
        let csv = traj.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "t,c_1,c_2,c_3");
        assert_eq!(csv.lines().nth(2).unwrap(), "0.5,1,2,3");
    }
}
