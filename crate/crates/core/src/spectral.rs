//! Floquet theory of the periodic operator: transfer and monodromy matrices,
//! the discriminant `Δ(λ) = tr M(λ)`, the hyperelliptic curve `y² = Δ²/4 - 1`,
//! the Dirichlet spectrum and the Bloch functions.
//!
//! Conventions: the state vector is `v_n = (ψ_n, ψ_{n-1})`, the one-step map is
//! `v_{n+1} = A_n v_n` and the monodromy is `M = A_{T-1} ⋯ A_1 A_0`, so that
//! `det M = 1`. The sheet `P_-` is the one on which `ρ → 0` as `λ → +∞`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{PeriodicOperator, ToleranceConfig};
use crate::poly::Poly;

pub type PolyMatrix = [[Poly; 2]; 2];

/// One-step transfer matrix `A_n(λ)` mapping `(ψ_n, ψ_{n-1})` to `(ψ_{n+1}, ψ_n)`.
pub fn transfer_step(op: &PeriodicOperator, n: usize) -> PolyMatrix {
    let n = n as isize;
    let next = op.a_at(n + 1);
    [
        [Poly::new(vec![0.0, 1.0 / next]), Poly::constant(-op.a_at(n) / next)],
        [Poly::constant(1.0), Poly::zero()],
    ]
}

fn poly_matmul(x: &PolyMatrix, y: &PolyMatrix) -> PolyMatrix {
    let entry = |i: usize, j: usize| &(&x[i][0] * &y[0][j]) + &(&x[i][1] * &y[1][j]);
    [[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyMatrix {
    pub m11: Poly,
    pub m12: Poly,
    pub m21: Poly,
    pub m22: Poly,
}

impl MonodromyMatrix {
    pub fn trace(&self) -> Poly {
        &self.m11 + &self.m22
    }

    pub fn det(&self) -> Poly {
        &(&self.m11 * &self.m22) - &(&self.m12 * &self.m21)
    }
}

pub fn monodromy(op: &PeriodicOperator) -> MonodromyMatrix {
    let mut m = transfer_step(op, 0);
    for n in 1..op.period() {
        m = poly_matmul(&transfer_step(op, n), &m);
    }
    let [[m11, m12], [m21, m22]] = m;
    MonodromyMatrix { m11, m12, m21, m22 }
}

/// Monodromy evaluated at a point by multiplying numeric 2×2 steps.
pub fn monodromy_at(op: &PeriodicOperator, lam: Complex64) -> [[Complex64; 2]; 2] {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut m = [[one, zero], [zero, one]];
    for n in 0..op.period() as isize {
        let next = op.a_at(n + 1);
        let (top_l, top_r) = (lam / next, -op.a_at(n) / next);
        m = [
            [top_l * m[0][0] + top_r * m[1][0], top_l * m[0][1] + top_r * m[1][1]],
            [m[0][0], m[0][1]],
        ];
    }
    m
}

type Mat2 = [[f64; 2]; 2];

fn mat2_mul(x: &Mat2, y: &Mat2) -> Mat2 {
    [
        [x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]],
        [x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]],
    ]
}

/// Real monodromy at `λ` with its partial derivatives: `(M, ∂M/∂c_i, ∂M/∂λ)`.
pub fn monodromy_gradient(op: &PeriodicOperator, lam: f64) -> (Mat2, Vec<Mat2>, Mat2) {
    let t = op.period();
    let a = op.a();
    let step = |n: usize| -> Mat2 {
        let next = a[(n + 1) % t];
        [[lam / next, -a[n] / next], [1.0, 0.0]]
    };
    let identity = [[1.0, 0.0], [0.0, 1.0]];
    // prefix[n] = A_{n-1} ⋯ A_0, suffix[n] = A_{T-1} ⋯ A_n
    let mut prefix = vec![identity; t + 1];
    for n in 0..t {
        prefix[n + 1] = mat2_mul(&step(n), &prefix[n]);
    }
    let mut suffix = vec![identity; t + 1];
    for n in (0..t).rev() {
        suffix[n] = mat2_mul(&suffix[n + 1], &step(n));
    }
    let around = |n: usize, d: &Mat2| mat2_mul(&mat2_mul(&suffix[n + 1], d), &prefix[n]);
    let mut d_lam = [[0.0; 2]; 2];
    let mut d_a = vec![[[0.0; 2]; 2]; t];
    for n in 0..t {
        let (cur, next) = (a[n], a[(n + 1) % t]);
        let contrib = around(n, &[[1.0 / next, 0.0], [0.0, 0.0]]);
        let by_next = around(n, &[[-lam / (next * next), cur / (next * next)], [0.0, 0.0]]);
        let by_cur = around(n, &[[0.0, -1.0 / next], [0.0, 0.0]]);
        for r in 0..2 {
            for c in 0..2 {
                d_lam[r][c] += contrib[r][c];
                d_a[(n + 1) % t][r][c] += by_next[r][c];
                d_a[n][r][c] += by_cur[r][c];
            }
        }
    }
    // ∂a_i/∂c_i = 1/(2 a_i)
    let d_c = d_a
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let f = 0.5 / a[i];
            [[m[0][0] * f, m[0][1] * f], [m[1][0] * f, m[1][1] * f]]
        })
        .collect();
    (prefix[t], d_c, d_lam)
}

/// `Δ(λ) = Σ_{i=0}^{N} (-1)^i I_i λ^{2N+1-2i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaPolynomial {
    i: Vec<f64>,
    poly: Poly,
}

impl DeltaPolynomial {
    pub fn new(i: Vec<f64>) -> Result<Self> {
        if i.len() < 2 {
            return Err(Error::InvalidInput("Δ needs at least I_0 and I_1".into()));
        }
        if i[0] == 0.0 || !i.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("I_0 must be finite and nonzero".into()));
        }
        let t = 2 * i.len() - 1;
        let mut coeffs = vec![0.0; t + 1];
        for (k, &v) in i.iter().enumerate() {
            coeffs[t - 2 * k] = if k % 2 == 0 { v } else { -v };
        }
        Ok(Self { poly: Poly::new(coeffs), i })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.i
    }

    pub fn n(&self) -> usize {
        self.i.len() - 1
    }

    pub fn period(&self) -> usize {
        2 * self.i.len() - 1
    }

    pub fn poly(&self) -> &Poly {
        &self.poly
    }

    pub fn eval(&self, lam: f64) -> f64 {
        self.poly.eval(lam)
    }

    pub fn eval_complex(&self, lam: Complex64) -> Complex64 {
        self.poly.eval_complex(lam)
    }

    /// `∂Δ/∂I_k = (-1)^k λ^{2N+1-2k}`.
    pub fn d_coefficient(&self, k: usize, lam: Complex64) -> Complex64 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        lam.powi((self.period() - 2 * k) as i32) * sign
    }

    /// Copy with `I_k` shifted by `h`.
    pub fn shifted(&self, k: usize, h: f64) -> Result<Self> {
        let mut i = self.i.clone();
        i[k] += h;
        Self::new(i)
    }

    /// Largest componentwise relative difference.
    pub fn max_relative_diff(&self, other: &Self) -> f64 {
        self.i
            .iter()
            .zip(&other.i)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

/// Reads `I_i` off the trace of the polynomial monodromy.
pub fn delta_from_monodromy(op: &PeriodicOperator, tol: &ToleranceConfig) -> Result<DeltaPolynomial> {
    let trace = monodromy(op).trace();
    let t = op.period();
    let scale = trace.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()));
    for power in (0..=t).filter(|p| p % 2 == 0) {
        let value = trace.coeff(power);
        if value.abs() > tol.eq_tol * scale {
            return Err(Error::ParityViolation { power, value });
        }
    }
    let i = (0..=op.n())
        .map(|k| {
            let v = trace.coeff(t - 2 * k);
            if k % 2 == 0 { v } else { -v }
        })
        .collect();
    DeltaPolynomial::new(i)
}

/// Size-`i` subsets of `Z_T` with no two cyclically adjacent elements, in lexicographic order.
pub fn enumerate_totally_disconnected(t: usize, i: usize) -> Result<Vec<Vec<usize>>> {
    if i > t / 2 {
        return Err(Error::OutOfRange(format!("subset size {i} exceeds N = {}", t / 2)));
    }
    fn extend(t: usize, want: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == want {
            out.push(current.clone());
            return;
        }
        for j in start..t {
            // the last element may not wrap around onto the first
            if let Some(&first) = current.first() {
                if first == 0 && j == t - 1 {
                    continue;
                }
            }
            current.push(j);
            extend(t, want, j + 2, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    extend(t, i, 0, &mut Vec::with_capacity(i), &mut out);
    Ok(out)
}

/// `I_0 = 1/∏a_i`, `I_i = I_0 · Σ_{totally disconnected |S| = i} ∏_{j∈S} c_j`.
pub fn delta_combinatorial(op: &PeriodicOperator) -> DeltaPolynomial {
    let i0 = inverse_product(op);
    let t = op.period();
    let mut i = vec![i0];
    for k in 1..=op.n() {
        let sum: f64 = enumerate_totally_disconnected(t, k)
            .expect("k <= N")
            .iter()
            .map(|s| s.iter().map(|&j| op.c()[j]).product::<f64>())
            .sum();
        i.push(i0 * sum);
    }
    DeltaPolynomial::new(i).expect("positive weights give finite coefficients")
}

pub(crate) fn inverse_product(op: &PeriodicOperator) -> f64 {
    1.0 / op.a().iter().product::<f64>()
}

/// `I_N = I_0 Σ_{k=0}^{2N} c_k c_{k+2} ⋯ c_{k+2N-2}`, indices mod `T`.
pub fn i_n_closed_form(op: &PeriodicOperator) -> f64 {
    let n = op.n() as isize;
    let sum: f64 = (0..op.period() as isize)
        .map(|k| (0..n).map(|m| op.c_at(k + 2 * m)).product::<f64>())
        .sum();
    inverse_product(op) * sum
}

/// Branch points of `y² = (Δ/2 + 1)(Δ/2 - 1)`.
#[derive(Debug, Clone)]
pub struct SpectralCurve {
    /// Roots of `Δ - 2`.
    pub plus: Vec<Complex64>,
    /// Roots of `Δ + 2`.
    pub minus: Vec<Complex64>,
    pub nonsingular: bool,
    /// Smallest distance between two branch points, with double roots resolved
    /// through the critical values of `Δ`.
    pub min_separation: f64,
    pub n: usize,
}

impl SpectralCurve {
    pub fn branch_points(&self) -> impl Iterator<Item = &Complex64> {
        self.plus.iter().chain(self.minus.iter())
    }

    pub fn branch_point_count(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    pub fn branch_radius(&self) -> f64 {
        self.branch_points().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn distance_to_branch_point(&self, lam: Complex64) -> f64 {
        self.branch_points().map(|z| (z - lam).norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn require_nonsingular(&self, tol: &ToleranceConfig) -> Result<()> {
        if self.nonsingular {
            return Ok(());
        }
        let pts: Vec<_> = self.branch_points().copied().collect();
        let (mut a, mut b, mut best) = (pts[0], pts[0], f64::INFINITY);
        for (x, p) in pts.iter().enumerate() {
            for q in &pts[x + 1..] {
                if (p - q).norm() < best {
                    best = (p - q).norm();
                    a = *p;
                    b = *q;
                }
            }
        }
        Err(Error::SingularCurve { a: fmt_complex(a), b: fmt_complex(b), sep: tol.sep_tol })
    }
}

pub(crate) fn fmt_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

pub fn spectral_curve(delta: &DeltaPolynomial, tol: &ToleranceConfig) -> Result<SpectralCurve> {
    let p = delta.poly();
    let two = Poly::constant(2.0);
    let plus = (p - &two).roots()?;
    let minus = (p + &two).roots()?;

    let mut min_separation = f64::INFINITY;
    let all: Vec<Complex64> = plus.iter().chain(minus.iter()).copied().collect();
    for (x, z) in all.iter().enumerate() {
        for w in &all[x + 1..] {
            min_separation = min_separation.min((z - w).norm());
        }
    }
    // A double root of Δ ∓ 2 is a critical point with |Δ| = 2; the companion
    // eigenvalues split it by ~√ε, so measure the splitting from Δ directly.
    let d1 = p.derivative();
    let d2 = d1.derivative();
    for mu in d1.roots()? {
        let value = p.eval_complex(mu);
        let curvature = d2.eval_complex(mu).norm();
        let excess = (value.norm() - 2.0).abs();
        if excess > 0.5 {
            continue;
        }
        let split = if curvature == 0.0 { 0.0 } else { 2.0 * (2.0 * excess / curvature).sqrt() };
        min_separation = min_separation.min(split);
    }
    Ok(SpectralCurve {
        nonsingular: min_separation > tol.sep_tol,
        min_separation,
        plus,
        minus,
        n: delta.n(),
    })
}

/// Eigenvalues of the zero-boundary problem `ψ_0 = ψ_T = 0`, all `2N` of them
/// in ascending order, with unit eigenvectors on `(ψ_1, …, ψ_{T-1})`.
#[derive(Debug, Clone)]
pub struct DirichletSpectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl DirichletSpectrum {
    /// The `N` positive eigenvalues `λ_1 < … < λ_N`.
    pub fn positive(&self) -> &[f64] {
        &self.values[self.values.len() / 2..]
    }

    /// Index into `values` of the k-th positive eigenvalue.
    pub fn positive_index(&self, k: usize) -> usize {
        self.values.len() / 2 + k
    }

    /// `max |λ_i + λ_{2N-1-i}|`.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.values.len();
        (0..m).map(|i| (self.values[i] + self.values[m - 1 - i]).abs()).fold(0.0, f64::max)
    }
}

/// The symmetric tridiagonal matrix of the Dirichlet problem: zero diagonal,
/// off-diagonal entries `a_2, …, a_{T-1}`.
pub fn dirichlet_matrix(op: &PeriodicOperator) -> DMatrix<f64> {
    let m = op.period() - 1;
    let mut b = DMatrix::zeros(m, m);
    for r in 0..m - 1 {
        b[(r, r + 1)] = op.a()[r + 2];
        b[(r + 1, r)] = op.a()[r + 2];
    }
    b
}

pub fn dirichlet_spectrum(op: &PeriodicOperator, tol: &ToleranceConfig) -> Result<DirichletSpectrum> {
    let eig = SymmetricEigen::new(dirichlet_matrix(op));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(values.len(), values.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    for w in values.windows(2) {
        if (w[1] - w[0]).abs() < tol.sep_tol {
            return Err(Error::DegenerateSpectrum(w[0], w[1]));
        }
    }
    Ok(DirichletSpectrum { values, vectors })
}

/// Floquet multiplier on the Dirichlet-compatible sheet: the eigenvalue of
/// `M(λ)` with eigenvector `(0, 1)`, which is `m22(λ)` when `m12(λ) = 0`.
/// There `m11 m22 = 1`; a small `m22` is formed by cancellation, so it is
/// taken as `1/m11` instead.
pub fn dirichlet_rho(op: &PeriodicOperator, lam: f64) -> f64 {
    let m = monodromy_at(op, Complex64::new(lam, 0.0));
    let (m11, m22) = (m[0][0].re, m[1][1].re);
    if m22.abs() >= 1.0 { m22 } else { 1.0 / m11 }
}

/// The same multiplier read off a Dirichlet eigenvector, `ρ = ψ_{T-1}/ψ_{-1}`
/// with `ψ_{-1} = -a_1 ψ_1 / a_0`.
pub fn dirichlet_rho_from_vector(op: &PeriodicOperator, v: &[f64]) -> f64 {
    let psi_minus = -op.a()[1] * v[0] / op.a()[0];
    v[v.len() - 1] / psi_minus
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Sheet {
    /// `ρ → 0` as `λ → +∞`.
    Minus,
    /// `ρ → ∞` as `λ → +∞`.
    Plus,
}

impl Sheet {
    pub fn sign(self) -> f64 {
        match self {
            Sheet::Minus => -1.0,
            Sheet::Plus => 1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sheet::Minus => Sheet::Plus,
            Sheet::Plus => Sheet::Minus,
        }
    }

    pub fn from_sign(s: i32) -> Self {
        if s < 0 { Sheet::Minus } else { Sheet::Plus }
    }
}

/// Both roots of `ρ² - Δρ + 1 = 0` without sheet resolution.
pub fn floquet_pair(delta: &DeltaPolynomial, lam: Complex64) -> (Complex64, Complex64) {
    let d = delta.eval_complex(lam);
    let s = (d * d / 4.0 - 1.0).sqrt();
    let big = if (d / 2.0 + s).norm() >= (d / 2.0 - s).norm() { d / 2.0 + s } else { d / 2.0 - s };
    if big.norm() == 0.0 {
        return (big, big);
    }
    (big, 1.0 / big)
}

fn rho_from_root(d: Complex64, sign: f64, s: Complex64) -> Complex64 {
    let candidate = d / 2.0 + s * sign;
    let other = d / 2.0 - s * sign;
    // avoid cancellation: the small root is the reciprocal of the large one
    if candidate.norm() < other.norm() && other.norm() > 0.0 {
        1.0 / other
    } else {
        candidate
    }
}

/// Evaluates `ρ(λ)` on a chosen sheet by continuing `√(Δ²/4 - 1)` along straight
/// segments from `λ_ref = 2 · (largest branch point modulus)`, where the root is
/// taken positive. Real targets inside the branch region are reached through
/// the upper half plane.
#[derive(Debug, Clone)]
pub struct FloquetEvaluator {
    delta: DeltaPolynomial,
    curve: SpectralCurve,
    lambda_ref: f64,
    sep_tol: f64,
}

impl FloquetEvaluator {
    pub fn new(delta: &DeltaPolynomial, tol: &ToleranceConfig) -> Result<Self> {
        let curve = spectral_curve(delta, tol)?;
        Ok(Self::with_curve(delta, curve, tol))
    }

    pub fn with_curve(delta: &DeltaPolynomial, curve: SpectralCurve, tol: &ToleranceConfig) -> Self {
        let lambda_ref = 2.0 * curve.branch_radius().max(1e-3);
        Self { delta: delta.clone(), curve, lambda_ref, sep_tol: tol.sep_tol }
    }

    pub fn curve(&self) -> &SpectralCurve {
        &self.curve
    }

    pub fn delta(&self) -> &DeltaPolynomial {
        &self.delta
    }

    pub fn lambda_ref(&self) -> f64 {
        self.lambda_ref
    }

    fn w(&self, z: Complex64) -> Complex64 {
        let d = self.delta.eval_complex(z);
        d * d / 4.0 - 1.0
    }

    fn path(&self, target: Complex64) -> Vec<Complex64> {
        let start = Complex64::new(self.lambda_ref, 0.0);
        let margin = 0.05 * self.lambda_ref;
        let clear = self.curve.branch_points().all(|b| segment_distance(start, target, *b) > margin);
        if clear {
            return vec![start, target];
        }
        let h = if target.im < 0.0 { -self.lambda_ref } else { self.lambda_ref };
        vec![
            start,
            Complex64::new(self.lambda_ref, h),
            Complex64::new(target.re, h),
            target,
        ]
    }

    /// `√(Δ²/4 - 1)` continued from the positive root at `λ_ref`.
    pub fn continued_root(&self, target: Complex64) -> Result<Complex64> {
        if self.curve.distance_to_branch_point(target) < self.sep_tol {
            return Err(Error::BranchAmbiguity(fmt_complex(target)));
        }
        let path = self.path(target);
        let mut z = path[0];
        let mut s = self.w(z).sqrt();
        if s.re < 0.0 {
            s = -s;
        }
        for end in &path[1..] {
            loop {
                let remaining = (end - z).norm();
                if remaining == 0.0 {
                    break;
                }
                let dist = self.curve.distance_to_branch_point(z);
                if dist < self.sep_tol {
                    return Err(Error::BranchAmbiguity(fmt_complex(target)));
                }
                // far from the branch points the phase of the root still turns
                // about T times faster than arg λ
                let degree = self.delta.period() as f64;
                let mut step = (0.2 * dist).min(0.2 * z.norm().max(dist) / degree).min(remaining).max(self.sep_tol);
                loop {
                    let next = if step >= remaining { *end } else { z + (end - z) * (step / remaining) };
                    let root = self.w(next).sqrt();
                    let (near, far) = ((root - s).norm(), (root + s).norm());
                    // halve until the continued root is unambiguous
                    if near.min(far) > 0.25 * near.max(far) && step > self.sep_tol {
                        step /= 2.0;
                        continue;
                    }
                    s = if near <= far { root } else { -root };
                    z = next;
                    break;
                }
            }
        }
        Ok(s)
    }

    pub fn rho(&self, lam: Complex64, sheet: Sheet) -> Result<Complex64> {
        let s = self.continued_root(lam)?;
        Ok(rho_from_root(self.delta.eval_complex(lam), sheet.sign(), s))
    }

    /// `(ρ, y)` on a sheet, `y = ρ - Δ/2`.
    pub fn rho_and_y(&self, lam: Complex64, sheet: Sheet) -> Result<(Complex64, Complex64)> {
        let s = self.continued_root(lam)?;
        let d = self.delta.eval_complex(lam);
        Ok((rho_from_root(d, sheet.sign(), s), s * sheet.sign()))
    }
}

fn segment_distance(p: Complex64, q: Complex64, x: Complex64) -> f64 {
    let d = q - p;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (x - p).norm();
    }
    let t = ((x - p) * d.conj()).re / len2;
    (p + d * t.clamp(0.0, 1.0) - x).norm()
}

/// One-shot `ρ(λ)` on a sheet; builds the branch data each call.
pub fn floquet_rho(delta: &DeltaPolynomial, lam: Complex64, sheet: Sheet, tol: &ToleranceConfig) -> Result<Complex64> {
    FloquetEvaluator::new(delta, tol)?.rho(lam, sheet)
}

/// Positive Dirichlet eigenvalues with their sheet-resolved Floquet multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct DivisorData {
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
    pub sheet: Vec<Sheet>,
    /// `|M(λ_k)(0,1)ᵀ - ρ_k (0,1)ᵀ|` for the selected multiplier.
    pub residual: Vec<f64>,
}

/// Picks, at each `λ_k`, the root of `ρ + 1/ρ = Δ(λ_k)` whose eigenvector of the
/// monodromy satisfies the Dirichlet condition `ψ_0 = 0`.
pub fn resolve_divisor_sheets(
    op: &PeriodicOperator,
    delta: &DeltaPolynomial,
    dirichlet: &DirichletSpectrum,
    tol: &ToleranceConfig,
) -> Result<DivisorData> {
    let evaluator = FloquetEvaluator::new(delta, tol)?;
    resolve_with(op, &evaluator, dirichlet)
}

pub(crate) fn resolve_with(
    op: &PeriodicOperator,
    evaluator: &FloquetEvaluator,
    dirichlet: &DirichletSpectrum,
) -> Result<DivisorData> {
    let mut out = DivisorData { lambda: vec![], rho: vec![], sheet: vec![], residual: vec![] };
    for &lam in dirichlet.positive() {
        let z = Complex64::new(lam, 0.0);
        let m = monodromy_at(op, z);
        let (r1, r2) = floquet_pair(evaluator.delta(), z);
        let residual = |r: Complex64| (m[0][1].norm_sqr() + (m[1][1] - r).norm_sqr()).sqrt();
        let (rho, res) = if residual(r1) <= residual(r2) { (r1, residual(r1)) } else { (r2, residual(r2)) };
        let on_minus = evaluator.rho(z, Sheet::Minus)?;
        let sheet = if (rho - on_minus).norm() <= (rho - 1.0 / on_minus).norm() { Sheet::Minus } else { Sheet::Plus };
        out.lambda.push(lam);
        out.rho.push(rho.re);
        out.sheet.push(sheet);
        out.residual.push(res);
    }
    Ok(out)
}

/// Bloch solution `ψ_0 = 1`, `ψ_{n+T} = ρ ψ_n`, for `n = 0..=n_max`.
pub fn bloch_function(
    op: &PeriodicOperator,
    delta: &DeltaPolynomial,
    lam: f64,
    sheet: Sheet,
    n_max: usize,
    tol: &ToleranceConfig,
) -> Result<Vec<Complex64>> {
    let evaluator = FloquetEvaluator::new(delta, tol)?;
    bloch_with(op, &evaluator, Complex64::new(lam, 0.0), sheet, n_max, tol)
}

pub(crate) fn bloch_with(
    op: &PeriodicOperator,
    evaluator: &FloquetEvaluator,
    lam: Complex64,
    sheet: Sheet,
    n_max: usize,
    tol: &ToleranceConfig,
) -> Result<Vec<Complex64>> {
    let rho = evaluator.rho(lam, sheet)?;
    let m = monodromy_at(op, lam);
    let scale = m.iter().flatten().map(|z| z.norm()).fold(1.0, f64::max);
    // eigenvector (1, ψ_{-1}); either row of (M - ρ) gives ψ_{-1}
    let den1 = m[0][1];
    let den2 = rho - m[1][1];
    let psi_minus = if den1.norm() >= den2.norm() {
        (rho - m[0][0]) / den1
    } else {
        m[1][0] / den2
    };
    if den1.norm().max(den2.norm()) < tol.sep_tol * scale || !psi_minus.is_finite() {
        return Err(Error::PoleHit(lam.re));
    }
    let mut psi = Vec::with_capacity(n_max + 1);
    let (mut prev, mut cur) = (psi_minus, Complex64::new(1.0, 0.0));
    psi.push(cur);
    for n in 0..n_max as isize {
        let next = (lam * cur - prev * op.a_at(n)) / op.a_at(n + 1);
        prev = cur;
        cur = next;
        psi.push(cur);
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn transfer_step_unit_weights() {
        let op = PeriodicOperator::new(vec![1.0; 3]).unwrap();
        let a = transfer_step(&op, 0);
        assert_eq!(a[0][0].coeffs(), &[0.0, 1.0]);
        assert_eq!(a[0][1].coeffs(), &[-1.0]);
        assert_eq!(a[1][0].coeffs(), &[1.0]);
        assert!(a[1][1].is_zero());
    }

    #[test]
    fn transfer_step_weighted() {
        let op = PeriodicOperator::new(vec![1.0, 4.0, 9.0]).unwrap();
        let a = transfer_step(&op, 0);
        assert_eq!(a[0][0].coeffs(), &[0.0, 0.5]);
        assert_eq!(a[0][1].coeffs(), &[-0.5]);
        // det A_n = a_n / a_{n+1}
        for n in 0..3 {
            let a = transfer_step(&op, n);
            let det = &(&a[0][0] * &a[1][1]) - &(&a[0][1] * &a[1][0]);
            let expect = op.a()[n] / op.a()[(n + 1) % 3];
            assert!((det.coeff(0) - expect).abs() < 1e-15 && det.degree() == 0);
        }
    }

    #[test]
    fn constant_lattice_monodromy() {
        let op = PeriodicOperator::new(vec![1.0; 3]).unwrap();
        let m = monodromy(&op);
        assert_eq!(m.trace().coeffs(), &[0.0, -3.0, 0.0, 1.0]);
        let d = delta_from_monodromy(&op, &tol()).unwrap();
        assert_eq!(d.coefficients(), &[1.0, 3.0]);
    }

    #[test]
    fn weighted_t3_delta() {
        let op = PeriodicOperator::new(vec![1.0, 4.0, 9.0]).unwrap();
        let d = delta_from_monodromy(&op, &tol()).unwrap();
        assert!((d.coefficients()[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((d.coefficients()[1] - 7.0 / 3.0).abs() < 1e-14);
        let comb = delta_combinatorial(&op);
        assert!(d.max_relative_diff(&comb) < 1e-14);
        assert!((i_n_closed_form(&op) - 14.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn determinant_is_one() {
        for seed in 0..5 {
            let op = PeriodicOperator::random(3, seed, 0.5, 2.0).unwrap();
            let m = monodromy(&op);
            let det = m.det();
            assert!((det.coeff(0) - 1.0).abs() < 1e-12);
            for k in 1..=det.degree() {
                assert!(det.coeff(k).abs() < 1e-11, "coefficient {k}: {}", det.coeff(k));
            }
            let tr = m.trace();
            assert_eq!(tr.degree(), 7);
            assert!((tr.leading() - inverse_product(&op)).abs() < 1e-13);
        }
    }

    #[test]
    fn numeric_monodromy_matches_polynomial() {
        let op = PeriodicOperator::random(2, 3, 0.5, 2.0).unwrap();
        let m = monodromy(&op);
        let z = Complex64::new(0.3, 0.7);
        let num = monodromy_at(&op, z);
        assert!((num[0][0] - m.m11.eval_complex(z)).norm() < 1e-13);
        assert!((num[0][1] - m.m12.eval_complex(z)).norm() < 1e-13);
        assert!((num[1][0] - m.m21.eval_complex(z)).norm() < 1e-13);
        assert!((num[1][1] - m.m22.eval_complex(z)).norm() < 1e-13);
    }

    #[test]
    fn delta_is_odd() {
        let op = PeriodicOperator::random(4, 9, 0.5, 2.0).unwrap();
        let d = delta_from_monodromy(&op, &tol()).unwrap();
        assert_eq!(d.poly().degree(), 9);
        assert_eq!(d.poly().reflect(), d.poly().scale(-1.0));
    }

    #[test]
    fn disconnected_subsets() {
        let s = enumerate_totally_disconnected(5, 2).unwrap();
        assert_eq!(s, vec![vec![0, 2], vec![0, 3], vec![1, 3], vec![1, 4], vec![2, 4]]);
        assert_eq!(enumerate_totally_disconnected(3, 1).unwrap(), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(enumerate_totally_disconnected(7, 0).unwrap(), vec![Vec::<usize>::new()]);
        assert!(matches!(enumerate_totally_disconnected(5, 3), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn disconnected_subset_counts() {
        fn binom(n: usize, k: usize) -> f64 {
            (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
        }
        for t in [3usize, 5, 7, 9, 11, 13] {
            for i in 0..=t / 2 {
                // brute force over all bitmasks
                let brute = (0u32..1 << t)
                    .filter(|m| m.count_ones() as usize == i)
                    .filter(|m| (0..t).all(|j| !(m >> j & 1 == 1 && m >> ((j + 1) % t) & 1 == 1)))
                    .count();
                let listed = enumerate_totally_disconnected(t, i).unwrap();
                assert_eq!(listed.len(), brute);
                let formula = t as f64 / (t - i) as f64 * binom(t - i, i);
                assert_eq!(listed.len(), formula.round() as usize);
                let mut sorted = listed.clone();
                sorted.sort();
                assert_eq!(sorted, listed);
            }
        }
    }

    #[test]
    fn constant_lattice_coefficients() {
        let op = PeriodicOperator::new(vec![1.0; 5]).unwrap();
        let d = delta_combinatorial(&op);
        assert_eq!(d.coefficients()[2], 5.0 * d.coefficients()[0]);
        for n in 1..6 {
            let op = PeriodicOperator::new(vec![1.0; 2 * n + 1]).unwrap();
            assert_eq!(i_n_closed_form(&op), (2 * n + 1) as f64);
        }
    }

    #[test]
    fn closed_form_matches_enumeration() {
        let op = PeriodicOperator::random(3, 17, 0.5, 2.0).unwrap();
        let d = delta_combinatorial(&op);
        let rel = (i_n_closed_form(&op) - d.coefficients()[3]).abs() / d.coefficients()[3];
        assert!(rel < 1e-14);
    }

    #[test]
    fn constant_lattice_curve_is_singular() {
        let op = PeriodicOperator::new(vec![1.0; 3]).unwrap();
        let d = delta_from_monodromy(&op, &tol()).unwrap();
        let curve = spectral_curve(&d, &tol()).unwrap();
        assert!(!curve.nonsingular);
        assert_eq!(curve.branch_point_count(), 6);
        assert!((curve.plus[2].re - 2.0).abs() < 1e-12);
        assert!(matches!(curve.require_nonsingular(&tol()), Err(Error::SingularCurve { .. })));
    }

    #[test]
    fn branch_points_are_symmetric() {
        let op = PeriodicOperator::random(3, 5, 0.5, 2.0).unwrap();
        let d = delta_from_monodromy(&op, &tol()).unwrap();
        let curve = spectral_curve(&d, &tol()).unwrap();
        assert!(curve.nonsingular);
        assert_eq!(curve.branch_point_count(), 4 * 3 + 2);
        for z in &curve.plus {
            let m = curve.minus.iter().map(|w| (w + z).norm()).fold(f64::INFINITY, f64::min);
            assert!(m < 1e-10);
        }
    }

    #[test]
    fn dirichlet_t3_by_hand() {
        let op = PeriodicOperator::new(vec![2.0, 3.0, 5.0]).unwrap();
        let spec = dirichlet_spectrum(&op, &tol()).unwrap();
        assert!((spec.positive()[0] - 5f64.sqrt()).abs() < 1e-14);
        assert!(spec.symmetry_defect() < 1e-14);
    }

    #[test]
    fn dirichlet_matches_monodromy_entry_roots() {
        let op = PeriodicOperator::random(3, 23, 0.5, 2.0).unwrap();
        let spec = dirichlet_spectrum(&op, &tol()).unwrap();
        let m12 = monodromy(&op).m12;
        assert_eq!(m12.degree(), 6);
        let roots = m12.roots().unwrap();
        for (r, v) in roots.iter().zip(&spec.values) {
            assert!(r.im.abs() < 1e-9 && (r.re - v).abs() < 1e-9, "{r} vs {v}");
        }
        assert!(spec.symmetry_defect() < 1e-12);
    }

    #[test]
    fn degenerate_spectrum_is_an_error() {
        // with a huge separation tolerance every neighbouring pair counts as coincident
        let tight = ToleranceConfig::new(1e-9, 1e-6, 10.0).unwrap();
        let op = PeriodicOperator::random(2, 1, 0.5, 2.0).unwrap();
        assert!(matches!(dirichlet_spectrum(&op, &tight), Err(Error::DegenerateSpectrum(..))));
    }

    #[test]
    fn floquet_values() {
        let op = PeriodicOperator::random(2, 11, 0.5, 2.0).unwrap();
        let d = delta_from_monodromy(&op, &tol()).unwrap();
        let ev = FloquetEvaluator::new(&d, &tol()).unwrap();
        // at a branch point of the Δ = 2 family both roots equal 1
        let (r1, r2) = floquet_pair(&d, ev.curve().plus[4]);
        assert!((r1 - 1.0).norm() < 1e-6 && (r2 - 1.0).norm() < 1e-6);
        assert!(matches!(ev.rho(ev.curve().plus[4], Sheet::Minus), Err(Error::BranchAmbiguity(_))));
        for z in [Complex64::new(0.3, 0.2), Complex64::new(-1.1, -0.4), Complex64::new(5.0, 0.0)] {
            let p = ev.rho(z, Sheet::Plus).unwrap();
            let m = ev.rho(z, Sheet::Minus).unwrap();
            assert!((p * m - 1.0).norm() < 1e-12);
            assert!((p + 1.0 / p - d.eval_complex(z)).norm() < 1e-10 * d.eval_complex(z).norm().max(1.0));
        }
        // off the real axis the P_- sheet is the one with |ρ| < 1
        for z in [Complex64::new(0.3, 0.2), Complex64::new(-1.1, -0.4), Complex64::new(-0.2, 1e-3)] {
            assert!(ev.rho(z, Sheet::Minus).unwrap().norm() < 1.0);
        }
    }

    #[test]
    fn log_rho_decays_on_minus_sheet() {
        let op = PeriodicOperator::random(2, 4, 0.5, 2.0).unwrap();
        let d = delta_from_monodromy(&op, &tol()).unwrap();
        let ev = FloquetEvaluator::new(&d, &tol()).unwrap();
        let j0: f64 = op.a().iter().map(|a| a.ln()).sum();
        let lam = 1e3;
        let r = ev.rho(Complex64::new(lam, 0.0), Sheet::Minus).unwrap();
        let approx = -5.0 * lam.ln() + j0;
        assert!((r.ln().re - approx).abs() < 1e-4);
    }

    #[test]
    fn divisor_sheet_resolution() {
        let op = PeriodicOperator::random(3, 8, 0.5, 2.0).unwrap();
        let d = delta_from_monodromy(&op, &tol()).unwrap();
        let spec = dirichlet_spectrum(&op, &tol()).unwrap();
        let div = resolve_divisor_sheets(&op, &d, &spec, &tol()).unwrap();
        for k in 0..3 {
            let rho = div.rho[k];
            assert!(div.residual[k] < 1e-9);
            assert!((rho + 1.0 / rho - d.eval(div.lambda[k])).abs() < 1e-9);
            // two independent routes to the Dirichlet-compatible multiplier
            assert!((rho - dirichlet_rho(&op, div.lambda[k])).abs() < 1e-9 * rho.abs().max(1.0));
            let col = spec.vectors.column(spec.positive_index(k));
            let v: Vec<f64> = col.iter().copied().collect();
            let via_vector = dirichlet_rho_from_vector(&op, &v);
            assert!((rho - via_vector).abs() < 1e-8 * rho.abs().max(1.0), "{rho} vs {via_vector}");
            // the rejected candidate 1/ρ leaves a residual of order one
            let m = monodromy_at(&op, Complex64::new(div.lambda[k], 0.0));
            assert!((m[1][1].re - 1.0 / rho).abs() > 1e-6);
        }
    }

    #[test]
    fn t3_divisor_by_hand() {
        // at λ = a_2 the Dirichlet vector is (1, 1)/√2 and ρ = -a_0/a_1
        let op = PeriodicOperator::new(vec![0.7, 1.3, 1.9]).unwrap();
        let spec = dirichlet_spectrum(&op, &tol()).unwrap();
        let lam = spec.positive()[0];
        assert!((lam - 1.9f64.sqrt()).abs() < 1e-14);
        let expect = -op.a()[0] / op.a()[1];
        assert!((dirichlet_rho(&op, lam) - expect).abs() < 1e-13);
        let d = delta_from_monodromy(&op, &tol()).unwrap();
        let div = resolve_divisor_sheets(&op, &d, &spec, &tol()).unwrap();
        assert!((div.rho[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn bloch_quasi_periodicity() {
        let op = PeriodicOperator::random(2, 21, 0.5, 2.0).unwrap();
        let d = delta_from_monodromy(&op, &tol()).unwrap();
        let ev = FloquetEvaluator::new(&d, &tol()).unwrap();
        // inside the branch region both Bloch solutions stay O(1) over two periods
        for lam in [0.37, 1.21, -0.83, 1.9] {
            for sheet in [Sheet::Minus, Sheet::Plus] {
                let z = Complex64::new(lam, 0.0);
                let rho = ev.rho(z, sheet).unwrap();
                let psi = bloch_with(&op, &ev, z, sheet, 15, &tol()).unwrap();
                assert_eq!(psi[0], Complex64::new(1.0, 0.0));
                let scale = psi.iter().map(|p| p.norm()).fold(0.0, f64::max);
                for n in 0..=10 {
                    assert!((psi[n + 5] - rho * psi[n]).norm() < 1e-9 * scale);
                }
            }
        }
    }

    #[test]
    fn bloch_pole_at_dirichlet_eigenvalue() {
        let op = PeriodicOperator::random(2, 21, 0.5, 2.0).unwrap();
        let d = delta_from_monodromy(&op, &tol()).unwrap();
        let spec = dirichlet_spectrum(&op, &tol()).unwrap();
        let div = resolve_divisor_sheets(&op, &d, &spec, &tol()).unwrap();
        let r = bloch_function(&op, &d, div.lambda[0], div.sheet[0], 5, &tol());
        assert!(matches!(r, Err(Error::PoleHit(_))));
        // the other sheet is regular there
        assert!(bloch_function(&op, &d, div.lambda[0], div.sheet[0].flip(), 5, &tol()).is_ok());
    }

    #[test]
    fn bloch_growth_at_infinity() {
        let op = PeriodicOperator::random(2, 2, 0.5, 2.0).unwrap();
        let d = delta_from_monodromy(&op, &tol()).unwrap();
        let ev = FloquetEvaluator::new(&d, &tol()).unwrap();
        let (l1, l2) = (1e3, 2e3);
        let p1 = bloch_with(&op, &ev, Complex64::new(l1, 0.0), Sheet::Plus, 4, &tol()).unwrap();
        let p2 = bloch_with(&op, &ev, Complex64::new(l2, 0.0), Sheet::Plus, 4, &tol()).unwrap();
        let m1 = bloch_with(&op, &ev, Complex64::new(l1, 0.0), Sheet::Minus, 4, &tol()).unwrap();
        let m2 = bloch_with(&op, &ev, Complex64::new(l2, 0.0), Sheet::Minus, 4, &tol()).unwrap();
        for n in 1..=4 {
            let slope_plus = (p2[n].norm() / p1[n].norm()).ln() / 2f64.ln();
            assert!((slope_plus - n as f64).abs() < 1e-3, "{slope_plus}");
        }
        // forward recursion of the recessive solution loses ~λ^{2n} ulps, so only n = 1
        let slope_minus = (m2[1].norm() / m1[1].norm()).ln() / 2f64.ln();
        assert!((slope_minus + 1.0).abs() < 1e-3, "{slope_minus}");
    }
}
