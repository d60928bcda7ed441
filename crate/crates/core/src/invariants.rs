//! Lax matrix, the integrals `J_k`, the expansions of `ln Δ` and `ln ρ` at
//! infinity, and the numerical form of the theorem on algebro-geometric brackets.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Pow, ToPrimitive, Zero};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{PeriodicOperator, ToleranceConfig};
use crate::poisson::BracketKind;
use crate::spectral::{DeltaPolynomial, FloquetEvaluator, Sheet};

/// Largest condition number accepted for a coefficient fit.
pub const FIT_CONDITION_LIMIT: f64 = 1e8;

/// Symmetric cyclic Lax matrix: `a_i` sits at `(i-1, i)` and `(i, i-1)`, indices mod `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaxMatrix(pub DMatrix<f64>);

impl LaxMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.0.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues().iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// `L^p` by repeated dense multiplication.
    pub fn power(&self, p: usize) -> DMatrix<f64> {
        let n = self.0.nrows();
        let mut out = DMatrix::identity(n, n);
        for _ in 0..p {
            out = &out * &self.0;
        }
        out
    }
}

/// Row/column of the upper slot holding `a_i`.
pub(crate) fn lax_slot(t: usize, i: usize) -> (usize, usize) {
    ((i + t - 1) % t, i)
}

pub fn lax_matrix(op: &PeriodicOperator) -> LaxMatrix {
    twisted_lax(op, 1.0)
}

/// Lax matrix with both corner entries negated; its eigenvalues are the roots of `Δ = -2`.
pub fn antiperiodic_lax(op: &PeriodicOperator) -> LaxMatrix {
    twisted_lax(op, -1.0)
}

fn twisted_lax(op: &PeriodicOperator, corner: f64) -> LaxMatrix {
    let t = op.period();
    let mut m = DMatrix::zeros(t, t);
    for i in 0..t {
        let (r, c) = lax_slot(t, i);
        let v = if i == 0 { corner * op.a()[0] } else { op.a()[i] };
        m[(r, c)] = v;
        m[(c, r)] = v;
    }
    LaxMatrix(m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantSet {
    /// `J_0 = ½ Σ ln c_i`, `J_k = tr L^{2k} / 2k`.
    pub j: Vec<f64>,
}

pub fn j_trace(op: &PeriodicOperator, k: usize) -> Result<f64> {
    if k > op.n() {
        return Err(Error::OutOfRange(format!("J_{k} needs k <= N = {}", op.n())));
    }
    if k == 0 {
        return Ok(0.5 * op.c().iter().map(|c| c.ln()).sum::<f64>());
    }
    Ok(lax_matrix(op).power(2 * k).trace() / (2 * k) as f64)
}

pub fn invariant_set(op: &PeriodicOperator) -> InvariantSet {
    let lax = lax_matrix(op);
    let square = lax.power(2);
    let mut j = vec![0.5 * op.c().iter().map(|c| c.ln()).sum::<f64>()];
    let mut p = square.clone();
    for k in 1..=op.n() {
        if k > 1 {
            p = &p * &square;
        }
        j.push(p.trace() / (2 * k) as f64);
    }
    InvariantSet { j }
}

/// `J_k` from the coefficients of `Δ`:
/// `Σ (-1)^{j_2 + j_4 + …} (j_1 + … + j_N - 1)! / (j_1! ⋯ j_N!) ∏ (I_m/I_0)^{j_m}`
/// over `j_1 + 2 j_2 + … + N j_N = k`.
pub fn j_from_i(delta: &DeltaPolynomial, k: usize) -> Result<f64> {
    let n = delta.n();
    if k == 0 || k > n {
        return Err(Error::OutOfRange(format!("J_{k} from I needs 1 <= k <= N = {n}")));
    }
    // the alternating sum cancels by up to eight digits at N = 10, so it is
    // accumulated exactly over the (rounded) coefficients and rounded once
    let i = delta.coefficients();
    let exact = |x: f64| BigRational::from_float(x).ok_or_else(|| Error::InvalidInput(format!("non-finite I coefficient {x}")));
    let i0 = exact(i[0])?;
    let ratio: Vec<BigRational> = (0..=n).map(|m| Ok(exact(i[m])? / &i0)).collect::<Result<_>>()?;
    let factorial = |m: usize| (1..=m).fold(BigInt::one(), |acc, x| acc * BigInt::from(x));
    let mut total = BigRational::zero();
    let mut parts = vec![0usize; n + 1];
    fn walk(
        m: usize,
        remaining: usize,
        parts: &mut Vec<usize>,
        ratio: &[BigRational],
        factorial: &dyn Fn(usize) -> BigInt,
        total: &mut BigRational,
    ) {
        if m == 0 {
            if remaining == 0 {
                let count: usize = parts.iter().sum();
                let sign_exp: usize = parts.iter().enumerate().filter(|(m, _)| m % 2 == 0).map(|(_, j)| j).sum();
                let denom = parts.iter().fold(BigInt::one(), |acc, &j| acc * factorial(j));
                let mut term = BigRational::new(factorial(count - 1), denom);
                for (m, &j) in parts.iter().enumerate().skip(1) {
                    term *= Pow::pow(&ratio[m], j as u32);
                }
                if sign_exp % 2 == 0 {
                    *total += term;
                } else {
                    *total -= term;
                }
            }
            return;
        }
        for j in 0..=remaining / m {
            parts[m] = j;
            walk(m - 1, remaining - j * m, parts, ratio, factorial, total);
        }
        parts[m] = 0;
    }
    walk(n, k, &mut parts, &ratio, &factorial, &mut total);
    total.to_f64().ok_or_else(|| Error::InvalidInput("J_k overflows f64".into()))
}

/// An asymptotic expansion `ℓ ln λ + Σ_p coefficients[p] λ^{-p}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesExpansion {
    pub log_coefficient: f64,
    pub coefficients: Vec<f64>,
    pub order: usize,
    /// Condition number of the sampling fit; `1` for exact series.
    pub condition: f64,
    /// Largest discrepancy between fits on two sample circles, zero for exact series.
    pub consistency: f64,
}

impl SeriesExpansion {
    /// Coefficient of `λ^{-2k}`.
    pub fn even(&self, k: usize) -> f64 {
        self.coefficients.get(2 * k).copied().unwrap_or(0.0)
    }

    /// Constant and `λ^{-2k}` coefficients for `k = 1..=n`.
    pub fn even_table(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|k| self.even(k)).collect()
    }
}

/// Coefficients `ℓ_k` of `ln(1 + Σ_{i≥1} (-1)^i (I_i/I_0) u^i) = Σ ℓ_k u^k`, `k = 1..=count`.
pub fn log_series(delta: &DeltaPolynomial, count: usize) -> Vec<f64> {
    let i = delta.coefficients();
    let b = |m: usize| {
        if m == 0 || m >= i.len() {
            0.0
        } else if m % 2 == 0 {
            i[m] / i[0]
        } else {
            -i[m] / i[0]
        }
    };
    // L' P = P'  ⇒  k ℓ_k = k b_k - Σ_{j<k} j ℓ_j b_{k-j}
    let mut ell = vec![0.0; count + 1];
    for k in 1..=count {
        let mut acc = k as f64 * b(k);
        for j in 1..k {
            acc -= j as f64 * ell[j] * b(k - j);
        }
        ell[k] = acc / k as f64;
    }
    ell.remove(0);
    ell
}

/// `ln Δ(λ) = (2N+1) ln λ + ln I_0 + Σ ℓ_k λ^{-2k}`, through `λ^{-order}`.
pub fn expand_log_delta(delta: &DeltaPolynomial, order: usize) -> SeriesExpansion {
    let ell = log_series(delta, order / 2);
    let mut coefficients = vec![0.0; order + 1];
    coefficients[0] = delta.coefficients()[0].ln();
    for (k, v) in ell.iter().enumerate() {
        coefficients[2 * (k + 1)] = *v;
    }
    SeriesExpansion {
        log_coefficient: delta.period() as f64,
        coefficients,
        order,
        condition: 1.0,
        consistency: 0.0,
    }
}

/// Least-squares fit of `f(λ) ≈ Σ_{p=first}^{last} x_p λ^{-p}` on samples of a
/// circle `|λ| = R`, using the scaled basis `(R/λ)^p`. Returns the coefficients
/// and the condition number of the design matrix.
pub fn fit_laurent(samples: &[(Complex64, Complex64)], radius: f64, first: usize, last: usize) -> Result<(Vec<Complex64>, f64)> {
    let cols = last - first + 1;
    let rows = samples.len();
    if rows < cols {
        return Err(Error::FitIllConditioned(f64::INFINITY));
    }
    let a = DMatrix::from_fn(rows, cols, |r, c| (Complex64::new(radius, 0.0) / samples[r].0).powi((first + c) as i32));
    let b = DMatrix::from_fn(rows, 1, |r, _| samples[r].1);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < FIT_CONDITION_LIMIT) {
        return Err(Error::FitIllConditioned(condition));
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::FitIllConditioned(if e.is_empty() { f64::INFINITY } else { condition }))?;
    let coeffs = (0..cols).map(|c| x[(c, 0)] * radius.powi((first + c) as i32)).collect();
    Ok((coeffs, condition))
}

fn circle(radius: f64, count: usize) -> Vec<Complex64> {
    (0..count).map(|j| Complex64::from_polar(radius, 2.0 * PI * j as f64 / count as f64)).collect()
}

/// `ln(ρ(λ) λ^{2N+1})` on the `P_-` sheet along a circle, with the logarithm
/// continued around the circle (it is single valued outside the branch points).
fn log_rho_scaled_on_circle(ev: &FloquetEvaluator, radius: f64, count: usize) -> Result<Vec<(Complex64, Complex64)>> {
    let t = ev.delta().period() as i32;
    let mut out = Vec::with_capacity(count);
    let mut prev: Option<Complex64> = None;
    for lam in circle(radius, count) {
        let rho = ev.rho(lam, Sheet::Minus)?;
        let mut g = (rho * lam.powi(t)).ln();
        if let Some(p) = prev {
            let turns = ((p.im - g.im) / (2.0 * PI)).round();
            g.im += 2.0 * PI * turns;
        }
        prev = Some(g);
        out.push((lam, g));
    }
    Ok(out)
}

fn sample_count(order: usize) -> usize {
    (8 * (order + 1)).max(128)
}

/// Expansion of `ln ρ` at `P_-`, `-(2N+1) ln λ + Σ_p x_p λ^{-p}`, extracted by
/// fitting samples on two circles outside the branch points.
pub fn expand_log_rho(delta: &DeltaPolynomial, order: usize, tol: &ToleranceConfig) -> Result<SeriesExpansion> {
    let ev = FloquetEvaluator::new(delta, tol)?;
    expand_log_rho_with(&ev, order)
}

pub(crate) fn fit_radii(ev: &FloquetEvaluator) -> (f64, f64) {
    let r = ev.curve().branch_radius().max(1e-3);
    (1.5 * r, 2.0 * r)
}

pub fn expand_log_rho_with(ev: &FloquetEvaluator, order: usize) -> Result<SeriesExpansion> {
    let (r1, r2) = fit_radii(ev);
    let m = sample_count(order);
    let (c1, cond1) = fit_laurent(&log_rho_scaled_on_circle(ev, r1, m)?, r1, 0, order)?;
    let (c2, cond2) = fit_laurent(&log_rho_scaled_on_circle(ev, r2, m)?, r2, 0, order)?;
    let consistency = c1
        .iter()
        .zip(&c2)
        .map(|(a, b)| (a - b).norm() / a.norm().max(1.0))
        .fold(0.0, f64::max);
    Ok(SeriesExpansion {
        log_coefficient: -(delta_period(ev) as f64),
        coefficients: c1.iter().map(|z| z.re).collect(),
        order,
        condition: cond1.max(cond2),
        consistency,
    })
}

fn delta_period(ev: &FloquetEvaluator) -> usize {
    ev.delta().period()
}

/// `λ^{2N+1} (ln ρ(λ) + ln Δ_series(λ))` at `λ = Λ 2^m`, `Λ = 4 · spectral radius`,
/// with the series of `ln Δ` truncated after `λ^{-2N}`. Computed through
/// `ln ρ + ln Δ = ln(1 + ρ²)` so that no digits cancel.
pub fn lemma_remainder(ev: &FloquetEvaluator, points: usize) -> Result<Vec<(f64, f64)>> {
    let delta = ev.delta();
    let n = delta.n();
    let t = delta.period() as i32;
    let big = 4.0 * ev.curve().branch_radius().max(1e-3);
    let tail_terms = n + 80;
    let ell = log_series(delta, tail_terms);
    let mut out = Vec::with_capacity(points);
    for m in 0..points {
        let lam = big * 2f64.powi(m as i32);
        let rho = ev.rho(Complex64::new(lam, 0.0), Sheet::Minus)?.re;
        let u = lam.powi(-2);
        // ln Δ - ln Δ_series = Σ_{k > N} ℓ_k u^k
        let tail: f64 = (n + 1..=tail_terms).rev().fold(0.0, |acc, k| (acc + ell[k - 1]) * u);
        let tail = tail * u.powi(n as i32);
        let value = (rho * rho).ln_1p() - tail;
        out.push((lam, lam.powi(t) * value));
    }
    Ok(out)
}

/// `2 ln ρ(λ) / λ^m` on the `P_-` sheet, `m = 1` (quadratic) or `3` (cubic).
pub fn q_form(ev: &FloquetEvaluator, lam: Complex64, kind: BracketKind) -> Result<Complex64> {
    let rho = ev.rho(lam, Sheet::Minus)?;
    Ok(2.0 * rho.ln() / lam.powi(kind.momentum_exponent() as i32))
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremAReport {
    pub kind: BracketKind,
    /// Coefficients of `λ^{-2k-1}`, `k = 1..=N`.
    pub fitted: Vec<f64>,
    /// `2 h_k`: `2 J_k` (quadratic) or `2 J_{k-1}` (cubic).
    pub expected: Vec<f64>,
    pub max_relative_error: f64,
    /// `(power, coefficient)` of terms below `λ^{-3}` absorbed as annulator terms.
    pub annulator_terms: Vec<(usize, f64)>,
    pub consistency: f64,
    pub condition: f64,
}

/// Fits the expansion of `Q` at `P_-` after removing the `ln λ / λ^m` term and
/// compares the `λ^{-2k-1}` coefficients with the Volterra hamiltonians.
pub fn theorem_a_check(op: &PeriodicOperator, kind: BracketKind, tol: &ToleranceConfig) -> Result<TheoremAReport> {
    let delta = crate::spectral::delta_combinatorial(op);
    let ev = FloquetEvaluator::new(&delta, tol)?;
    let n = op.n();
    let j = invariant_set(op).j;
    let m = kind.momentum_exponent() as usize;
    let t = op.period() as f64;
    let last = 2 * n + 1;
    let (r1, r2) = fit_radii(&ev);
    let count = sample_count(last);
    let fit = |radius: f64| -> Result<(Vec<Complex64>, f64)> {
        let mut samples = Vec::with_capacity(count);
        let mut prev: Option<Complex64> = None;
        for lam in circle(radius, count) {
            let q = q_form(&ev, lam, kind)?;
            // λ^m Q / 2 + T ln λ = ln(ρ λ^T), continued around the circle
            let mut g = lam.powi(m as i32) * q / 2.0 + t * lam.ln();
            if let Some(p) = prev {
                g.im += 2.0 * PI * ((p.im - g.im) / (2.0 * PI)).round();
            }
            prev = Some(g);
            samples.push((lam, 2.0 * g / lam.powi(m as i32)));
        }
        fit_laurent(&samples, radius, m, last + 2)
    };
    let (c1, cond1) = fit(r1)?;
    let (c2, cond2) = fit(r2)?;
    let coeff = |c: &[Complex64], power: usize| c[power - m].re;
    let fitted: Vec<f64> = (1..=n).map(|k| coeff(&c1, 2 * k + 1)).collect();
    let expected: Vec<f64> = (1..=n)
        .map(|k| match kind {
            BracketKind::Quadratic => 2.0 * j[k],
            BracketKind::Cubic => 2.0 * j[k - 1],
        })
        .collect();
    let max_relative_error = fitted
        .iter()
        .zip(&expected)
        .map(|(f, e)| (f - e).abs() / e.abs().max(1.0))
        .fold(0.0, f64::max);
    let annulator_terms = (m..3).map(|p| (p, coeff(&c1, p))).collect();
    let consistency = (1..=n)
        .map(|k| (coeff(&c1, 2 * k + 1) - coeff(&c2, 2 * k + 1)).abs() / coeff(&c1, 2 * k + 1).abs().max(1.0))
        .fold(0.0, f64::max);
    Ok(TheoremAReport {
        kind,
        fitted,
        expected,
        max_relative_error,
        annulator_terms,
        consistency,
        condition: cond1.max(cond2),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremBReport {
    pub kind: BracketKind,
    /// Coefficient indices differentiated along (the annulator is held fixed).
    pub directions: Vec<usize>,
    /// `max |∂Q/∂I_k - target| / |target|` over directions and samples.
    pub max_relative_deviation: f64,
    /// `max |ω(λ) + ω(-λ)| / |ω(λ)|`, the σ-invariance defect of `ω = ∂Q/∂I_k dλ`.
    pub sigma_defect: f64,
    /// Condition number of the (samples × directions) matrix of differentials.
    pub rank_condition: f64,
    pub samples: usize,
}

/// Tangent directions to the annulator level set and the exponent of `λ` in
/// the expected differential `± λ^e dλ / y`.
pub fn theorem_b_basis(n: usize, kind: BracketKind) -> Vec<(usize, usize, f64)> {
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    match kind {
        BracketKind::Quadratic => (1..=n).map(|j| (j, 2 * n - 2 * j, sign(j))).collect(),
        BracketKind::Cubic => (0..n).map(|k| (k, 2 * (n - k) - 2, sign(k))).collect(),
    }
}

/// Default samples: `max(8, N)` points on the upper half of `|λ| = 1.25 · branch radius`.
pub fn theorem_b_samples(ev: &FloquetEvaluator) -> Vec<Complex64> {
    let count = 8usize.max(ev.delta().n());
    let r = 1.25 * ev.curve().branch_radius().max(1e-3);
    (0..count)
        .map(|j| Complex64::from_polar(r, PI * (j as f64 + 0.5) / count as f64))
        .collect()
}

/// Central difference of `Q` along `I_k` at `λ`, Richardson-extrapolated, with the
/// perturbed multiplier tracked to the root nearest the unperturbed one.
pub fn q_derivative(
    ev: &FloquetEvaluator,
    kind: BracketKind,
    k: usize,
    lam: Complex64,
    rel_step: f64,
) -> Result<Complex64> {
    let delta = ev.delta();
    let rho0 = ev.rho(lam, Sheet::Minus)?;
    let d0 = delta.eval_complex(lam);
    let dd = delta.d_coefficient(k, lam);
    let m = kind.momentum_exponent() as i32;
    let tracked = |h: f64| {
        let d = d0 + dd * h;
        let s = (d * d / 4.0 - 1.0).sqrt();
        let (r1, r2) = (d / 2.0 + s, d / 2.0 - s);
        // take the larger root exactly and the smaller as its reciprocal
        let (big, small) = if r1.norm() >= r2.norm() { (r1, 1.0 / r1) } else { (r2, 1.0 / r2) };
        if (big - rho0).norm() < (small - rho0).norm() { big } else { small }
    };
    let h = rel_step * d0.norm() / dd.norm();
    let central = |h: f64| 2.0 * (tracked(h) / tracked(-h)).ln() / (2.0 * h) / lam.powi(m);
    let coarse = central(h);
    let fine = central(h / 2.0);
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Derivatives of `Q dλ` along the tangent basis of the annulator level set,
/// compared with `(-1)^k λ^e dλ / y` at the given samples.
pub fn theorem_b_check(
    delta: &DeltaPolynomial,
    kind: BracketKind,
    samples: Option<&[Complex64]>,
    tol: &ToleranceConfig,
) -> Result<TheoremBReport> {
    let ev = FloquetEvaluator::new(delta, tol)?;
    let owned;
    let samples = match samples {
        Some(s) => s,
        None => {
            owned = theorem_b_samples(&ev);
            &owned
        }
    };
    let basis = theorem_b_basis(delta.n(), kind);
    let rel_step = tol.fd_step.sqrt() * 0.1;
    let mut max_dev: f64 = 0.0;
    let mut sigma: f64 = 0.0;
    let mut matrix = DMatrix::<Complex64>::zeros(samples.len(), basis.len());
    let near = 1e3 * tol.sep_tol;
    for (r, &lam) in samples.iter().enumerate() {
        if ev.curve().distance_to_branch_point(lam) < near || lam.norm() < near {
            return Err(Error::NearBranchPoint(crate::spectral::fmt_complex(lam)));
        }
        let (_, y) = ev.rho_and_y(lam, Sheet::Minus)?;
        for (c, &(k, exponent, sign)) in basis.iter().enumerate() {
            let got = q_derivative(&ev, kind, k, lam, rel_step)?;
            let target = lam.powi(exponent as i32) * sign / y;
            max_dev = max_dev.max((got - target).norm() / target.norm());
            let mirrored = q_derivative(&ev, kind, k, -lam, rel_step)?;
            sigma = sigma.max((got + mirrored).norm() / got.norm());
            matrix[(r, c)] = got;
        }
    }
    for mut row in matrix.row_iter_mut() {
        let s = row.iter().map(|z| z.norm()).fold(0.0, f64::max);
        row /= Complex64::new(s, 0.0);
    }
    for mut col in matrix.column_iter_mut() {
        let s = col.norm();
        col /= Complex64::new(s, 0.0);
    }
    let sv = matrix.singular_values();
    let rank_condition = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
    Ok(TheoremBReport {
        kind,
        directions: basis.iter().map(|b| b.0).collect(),
        max_relative_deviation: max_dev,
        sigma_defect: sigma,
        rank_condition,
        samples: samples.len(),
    })
}
