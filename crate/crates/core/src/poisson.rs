//! The quadratic and cubic Volterra brackets on gradients, gradients of the
//! spectral functions, and the symplectic checks built from them.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariants::{lax_matrix, lax_slot};
use crate::lattice::{PeriodicOperator, ToleranceConfig};
use crate::spectral::{
    delta_combinatorial, dirichlet_rho, dirichlet_spectrum, enumerate_totally_disconnected, inverse_product,
    monodromy_gradient, resolve_with, DirichletSpectrum, FloquetEvaluator, Sheet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BracketKind {
    /// `{c_i, c_j}_1 = c_i c_j (δ_{i+1,j} - δ_{j+1,i})`.
    Quadratic,
    /// `{c_i, c_j}_2`, cubic in the weights.
    Cubic,
}

impl BracketKind {
    pub const ALL: [BracketKind; 2] = [BracketKind::Quadratic, BracketKind::Cubic];

    /// Index `i` of the coefficient `I_i` generating the annulator.
    pub fn annulator_index(self, n: usize) -> usize {
        match self {
            BracketKind::Quadratic => 0,
            BracketKind::Cubic => n,
        }
    }

    pub fn annulator_label(self) -> &'static str {
        match self {
            BracketKind::Quadratic => "I_0",
            BracketKind::Cubic => "I_N",
        }
    }

    /// `m` in `p_k = 2 ln ρ_k / λ_k^m`.
    pub fn momentum_exponent(self) -> u32 {
        match self {
            BracketKind::Quadratic => 1,
            BracketKind::Cubic => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BracketKind::Quadratic => "quadratic",
            BracketKind::Cubic => "cubic",
        }
    }
}

/// `g_i = ∂f/∂c_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gradient(pub Vec<f64>);

impl Gradient {
    pub fn unit(t: usize, i: usize) -> Self {
        let mut g = vec![0.0; t];
        g[i % t] = 1.0;
        Gradient(g)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Gradient(self.0.iter().map(|g| g * s).collect())
    }

    pub fn add_scaled(&mut self, other: &Gradient, s: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }
}

/// `coef · ∏ c_v` over `vars` (with multiplicity).
#[derive(Debug, Clone, PartialEq)]
struct Monomial {
    coef: f64,
    vars: Vec<usize>,
}

impl Monomial {
    fn eval(&self, c: &[f64]) -> f64 {
        self.vars.iter().fold(self.coef, |acc, &v| acc * c[v])
    }

    /// `∂/∂c_l`.
    fn partial(&self, l: usize, c: &[f64]) -> f64 {
        let mut total = 0.0;
        for (skip, &v) in self.vars.iter().enumerate() {
            if v == l {
                total += self
                    .vars
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != skip)
                    .fold(self.coef, |acc, (_, &w)| acc * c[w]);
            }
        }
        total
    }
}

/// Structure constants `{c_i, c_j}` as polynomials in the weights.
#[derive(Debug, Clone)]
pub struct StructurePolynomials {
    t: usize,
    entries: Vec<Vec<Monomial>>,
}

impl StructurePolynomials {
    pub fn new(kind: BracketKind, t: usize) -> Self {
        let mut s = Self { t, entries: vec![Vec::new(); t * t] };
        for i in 0..t {
            let (i1, i2) = ((i + 1) % t, (i + 2) % t);
            match kind {
                BracketKind::Quadratic => s.add(i, i1, vec![i, i1]),
                BracketKind::Cubic => {
                    s.add(i, i1, vec![i, i, i1]);
                    s.add(i, i1, vec![i, i1, i1]);
                    s.add(i, i2, vec![i, i1, i2]);
                }
            }
        }
        s
    }

    /// Adds `∏ c_vars` to `{c_i, c_j}` and its negative to `{c_j, c_i}`.
    fn add(&mut self, i: usize, j: usize, vars: Vec<usize>) {
        let t = self.t;
        self.entries[i * t + j].push(Monomial { coef: 1.0, vars: vars.clone() });
        self.entries[j * t + i].push(Monomial { coef: -1.0, vars });
    }

    pub fn eval(&self, i: usize, j: usize, c: &[f64]) -> f64 {
        self.entries[i * self.t + j].iter().map(|m| m.eval(c)).sum()
    }

    pub fn partial(&self, i: usize, j: usize, l: usize, c: &[f64]) -> f64 {
        self.entries[i * self.t + j].iter().map(|m| m.partial(l, c)).sum()
    }

    pub fn matrix(&self, c: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.t, self.t, |i, j| self.eval(i, j, c))
    }
}

pub fn structure_matrix(kind: BracketKind, c: &[f64]) -> DMatrix<f64> {
    StructurePolynomials::new(kind, c.len()).matrix(c)
}

/// A bracket with its structure matrix evaluated at a fixed state.
#[derive(Debug, Clone)]
pub struct Bracket {
    pub kind: BracketKind,
    matrix: DMatrix<f64>,
}

impl Bracket {
    pub fn new(kind: BracketKind, op: &PeriodicOperator) -> Self {
        Self { kind, matrix: structure_matrix(kind, op.c()) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `Σ_{i<j} P_ij (f_i g_j - f_j g_i)`, which is exactly antisymmetric.
    pub fn eval(&self, gf: &Gradient, gg: &Gradient) -> Result<f64> {
        Ok(self.eval_with_scale(gf, gg)?.0)
    }

    /// Value together with `Σ |P_ij| (|f_i g_j| + |f_j g_i|)`, the size of the
    /// terms that were summed.
    pub fn eval_with_scale(&self, gf: &Gradient, gg: &Gradient) -> Result<(f64, f64)> {
        let t = self.matrix.nrows();
        for g in [gf, gg] {
            if g.len() != t {
                return Err(Error::LengthMismatch { expected: t, got: g.len() });
            }
        }
        let (f, g) = (&gf.0, &gg.0);
        let mut value = 0.0;
        let mut scale = 0.0;
        for i in 0..t {
            for j in i + 1..t {
                let p = self.matrix[(i, j)];
                if p == 0.0 {
                    continue;
                }
                value += p * (f[i] * g[j] - f[j] * g[i]);
                scale += p.abs() * ((f[i] * g[j]).abs() + (f[j] * g[i]).abs());
            }
        }
        Ok((value, scale))
    }
}

pub fn bracket_eval(kind: BracketKind, gf: &Gradient, gg: &Gradient, c: &[f64]) -> Result<f64> {
    Bracket { kind, matrix: structure_matrix(kind, c) }.eval(gf, gg)
}

/// `∂I_k/∂c_j` by the product rule over the totally disconnected subsets.
pub fn grad_i(op: &PeriodicOperator, k: usize) -> Result<Gradient> {
    let n = op.n();
    if k > n {
        return Err(Error::OutOfRange(format!("I_{k} needs k <= N = {n}")));
    }
    let t = op.period();
    let c = op.c();
    let i0 = inverse_product(op);
    let subsets = enumerate_totally_disconnected(t, k)?;
    let total: f64 = subsets.iter().map(|s| s.iter().map(|&j| c[j]).product::<f64>()).sum();
    let ik = i0 * total;
    let mut g: Vec<f64> = c.iter().map(|cj| -ik / (2.0 * cj)).collect();
    for s in &subsets {
        for (pos, &j) in s.iter().enumerate() {
            let rest: f64 = s.iter().enumerate().filter(|(q, _)| *q != pos).map(|(_, &v)| c[v]).product();
            g[j] += i0 * rest;
        }
    }
    Ok(Gradient(g))
}

pub fn grad_all_i(op: &PeriodicOperator) -> Vec<Gradient> {
    (0..=op.n()).map(|k| grad_i(op, k).expect("k <= N")).collect()
}

/// `∂J_k/∂c_i = (L^{2k-1})_{i-1,i} / a_i`; `k = 0` gives `1/(2c_i)`.
pub fn grad_j(op: &PeriodicOperator, k: usize) -> Result<Gradient> {
    let n = op.n();
    if k > n {
        return Err(Error::OutOfRange(format!("J_{k} needs k <= N = {n}")));
    }
    if k == 0 {
        return Ok(Gradient(op.c().iter().map(|c| 0.5 / c).collect()));
    }
    let t = op.period();
    let p = lax_matrix(op).power(2 * k - 1);
    Ok(Gradient(
        (0..t)
            .map(|i| {
                let (r, col) = lax_slot(t, i);
                p[(r, col)] / op.a()[i]
            })
            .collect(),
    ))
}

/// `∂λ/∂c_i = v_{i-2} v_{i-1} / a_i` for the eigenvalue `values[index]`;
/// `c_0` and `c_1` do not enter the Dirichlet matrix.
pub fn grad_dirichlet_with(op: &PeriodicOperator, spectrum: &DirichletSpectrum, index: usize) -> Result<Gradient> {
    let m = spectrum.values.len();
    if index >= m {
        return Err(Error::OutOfRange(format!("Dirichlet index {index} >= {m}")));
    }
    let v = spectrum.vectors.column(index);
    let mut g = vec![0.0; op.period()];
    for (i, gi) in g.iter_mut().enumerate().skip(2) {
        *gi = v[i - 2] * v[i - 1] / op.a()[i];
    }
    Ok(Gradient(g))
}

/// Gradient of the `index`-th Dirichlet eigenvalue in ascending order (`0..2N`).
pub fn grad_dirichlet(op: &PeriodicOperator, index: usize, tol: &ToleranceConfig) -> Result<Gradient> {
    grad_dirichlet_with(op, &dirichlet_spectrum(op, tol)?, index)
}

/// `(q, p, ρ)` at the Dirichlet eigenvalue `values[index]`: `q = λ`,
/// `ρ = m22(λ)` (the multiplier of the Dirichlet-compatible eigenvector) and
/// `p = 2 ln|ρ| / λ^m`.
pub fn divisor_point(op: &PeriodicOperator, index: usize, kind: BracketKind, tol: &ToleranceConfig) -> Result<(f64, f64, f64)> {
    let spec = dirichlet_spectrum(op, tol)?;
    let lam = *spec
        .values
        .get(index)
        .ok_or_else(|| Error::OutOfRange(format!("Dirichlet index {index}")))?;
    let rho = dirichlet_rho(op, lam);
    Ok((lam, momentum(lam, rho, kind), rho))
}

fn momentum(lam: f64, rho: f64, kind: BracketKind) -> f64 {
    2.0 * rho.abs().ln() / lam.powi(kind.momentum_exponent() as i32)
}

/// `∇p` at `values[index]` from the derivatives of the monodromy: with
/// `ρ = m22(λ)` (or `1/m11(λ)` when `|m22| < 1`),
/// `∇ρ = ∂_c m + ∂_λ m · ∇λ` and `∇p = 2∇ρ/(ρ λ^m) - m p ∇λ / λ`.
pub fn grad_p_analytic_with(
    op: &PeriodicOperator,
    spectrum: &DirichletSpectrum,
    index: usize,
    kind: BracketKind,
) -> Result<Gradient> {
    let lam = *spectrum
        .values
        .get(index)
        .ok_or_else(|| Error::OutOfRange(format!("Dirichlet index {index}")))?;
    let gl = grad_dirichlet_with(op, spectrum, index)?.0;
    let (m, dc, dl) = monodromy_gradient(op, lam);
    let m_exp = kind.momentum_exponent() as i32;
    let use_m22 = m[1][1].abs() >= 1.0;
    let rho = if use_m22 { m[1][1] } else { 1.0 / m[0][0] };
    let p = momentum(lam, rho, kind);
    let lam_m = lam.powi(m_exp);
    Ok(Gradient(
        (0..op.period())
            .map(|i| {
                let d_rho = if use_m22 {
                    dc[i][1][1] + dl[1][1] * gl[i]
                } else {
                    -rho * rho * (dc[i][0][0] + dl[0][0] * gl[i])
                };
                2.0 * d_rho / (rho * lam_m) - m_exp as f64 * p * gl[i] / lam
            })
            .collect(),
    ))
}

pub fn grad_p_analytic(op: &PeriodicOperator, index: usize, kind: BracketKind, tol: &ToleranceConfig) -> Result<Gradient> {
    grad_p_analytic_with(op, &dirichlet_spectrum(op, tol)?, index, kind)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentumGradient {
    pub gradient: Gradient,
    /// Largest relative disagreement between the step-`h` and step-`h/2` differences.
    pub richardson_defect: f64,
}

/// Steps tried above the base step `fd_step · max(1, c_i)`, as powers of ten.
const STEP_LADDER: i32 = 3;

/// Central differences of `p` at `values[index]`, Richardson-extrapolated. Per
/// coordinate the base step and its multiples `10^j` are tried, and the pair
/// `(h, h/2)` that agrees best is kept, which balances truncation against the
/// rounding noise of the monodromy evaluation. The sign of `ρ` is tracked
/// across each perturbation; a change halves the step, and five halvings
/// without success raise `SheetFlip`.
pub fn grad_p(op: &PeriodicOperator, index: usize, kind: BracketKind, tol: &ToleranceConfig) -> Result<MomentumGradient> {
    let (_, p0, rho0) = divisor_point(op, index, kind, tol)?;
    if !p0.is_finite() {
        return Err(Error::SheetFlip(0));
    }
    let t = op.period();
    let mut g = vec![0.0; t];
    let mut defect: f64 = 0.0;
    for i in 0..t {
        let diff = |h: f64| -> Result<Option<f64>> {
            let (_, pp, rp) = divisor_point(&op.perturb(i, h)?, index, kind, tol)?;
            let (_, pm, rm) = divisor_point(&op.perturb(i, -h)?, index, kind, tol)?;
            let tracked = rp.signum() == rho0.signum() && rm.signum() == rho0.signum();
            Ok(if tracked && pp.is_finite() && pm.is_finite() { Some((pp - pm) / (2.0 * h)) } else { None })
        };
        let base = tol.fd_step * op.c()[i].max(1.0);
        let mut best: Option<(f64, f64, f64)> = None;
        for j in 0..=STEP_LADDER {
            let mut h = base * 10f64.powi(j);
            let mut attempt = 0;
            let pair = loop {
                match (diff(h)?, diff(h / 2.0)?) {
                    (Some(a), Some(b)) => break Some((a, b)),
                    _ if j > 0 => break None,
                    _ => {
                        attempt += 1;
                        if attempt > 5 {
                            return Err(Error::SheetFlip(i));
                        }
                        h /= 2.0;
                    }
                }
            };
            if let Some((coarse, fine)) = pair {
                let gap = (fine - coarse).abs();
                if best.is_none_or(|b| gap < b.2) {
                    best = Some((coarse, fine, gap));
                }
            }
        }
        let (coarse, fine, gap) = best.expect("the base step either succeeds or errors");
        g[i] = (4.0 * fine - coarse) / 3.0;
        defect = defect.max(gap / fine.abs().max(p0.abs()).max(1.0));
    }
    Ok(MomentumGradient { gradient: Gradient(g), richardson_defect: defect })
}

/// Divisor coordinates `q_k = λ_k` (positive Dirichlet eigenvalues, or their
/// mirror images `-λ_k` when flipped) and momenta `p_k = 2 ln|ρ_k| / q_k^m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonicalChart {
    pub kind: BracketKind,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub rho: Vec<f64>,
    /// Sheet of `(λ_k, ρ_k)` from the Dirichlet-compatible eigenvector.
    #[serde(skip)]
    pub sheets: Vec<Sheet>,
    /// Per coordinate, whether `λ_k` was replaced by `-λ_k`.
    pub flipped: Vec<bool>,
    /// Full-spectrum index of each coordinate.
    pub indices: Vec<usize>,
}

pub fn canonical_chart(op: &PeriodicOperator, kind: BracketKind, flipped: &[bool], tol: &ToleranceConfig) -> Result<CanonicalChart> {
    let spec = dirichlet_spectrum(op, tol)?;
    let delta = delta_combinatorial(op);
    let ev = FloquetEvaluator::new(&delta, tol)?;
    let divisor = resolve_with(op, &ev, &spec)?;
    let n = op.n();
    let mut chart = CanonicalChart {
        kind,
        q: vec![],
        p: vec![],
        rho: vec![],
        sheets: divisor.sheet.clone(),
        flipped: flipped.to_vec(),
        indices: vec![],
    };
    for k in 0..n {
        let index = if flipped[k] { n - 1 - k } else { spec.positive_index(k) };
        let lam = spec.values[index];
        let rho = dirichlet_rho(op, lam);
        chart.q.push(lam);
        chart.p.push(momentum(lam, rho, kind));
        chart.rho.push(rho);
        chart.indices.push(index);
    }
    Ok(chart)
}

/// Largest `|{λ_i, λ_j}|` over all pairs of the `2N` Dirichlet eigenvalues.
pub fn verify_involution(op: &PeriodicOperator, kind: BracketKind, tol: &ToleranceConfig) -> Result<f64> {
    let spec = dirichlet_spectrum(op, tol)?;
    let bracket = Bracket::new(kind, op);
    let grads: Vec<Gradient> =
        (0..spec.values.len()).map(|k| grad_dirichlet_with(op, &spec, k)).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..grads.len() {
        for j in i..grads.len() {
            worst = worst.max(bracket.eval(&grads[i], &grads[j])?.abs());
        }
    }
    Ok(worst)
}

/// `max(1, |λ|_max³)`.
pub fn involution_scale(op: &PeriodicOperator, tol: &ToleranceConfig) -> Result<f64> {
    let spec = dirichlet_spectrum(op, tol)?;
    Ok(spec.values.iter().map(|v| v.abs()).fold(1.0, f64::max).powi(3).max(1.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct CanonicalReport {
    pub chart: CanonicalChart,
    /// `{q_i, p_j}`, row-major `N × N`.
    pub qp: Vec<Vec<f64>>,
    /// `{p_i, p_j}`.
    pub pp: Vec<Vec<f64>>,
    /// `max |{q_i, p_j} - δ_ij|`.
    pub qp_defect: f64,
    /// `max |{p_i, p_j}|`.
    pub pp_defect: f64,
    /// Largest gap between the analytic momentum gradients and their
    /// finite-difference estimates, relative to the gradient size (zero when
    /// the cross-check is skipped).
    pub fd_agreement: f64,
    /// Per coordinate, `C = λ_k (p_k + p'_k)` for the mirror point `-λ_k`, where
    /// `p'_k` is its momentum; the covariance `p → -p + C/λ`.
    pub mirror_shift: Vec<f64>,
    /// Whether a first pass with `{q_k, p_k} ≈ -1` forced a rerun on flipped sheets.
    pub reran: bool,
}

fn canonical_matrices(
    op: &PeriodicOperator,
    chart: &CanonicalChart,
    cross_check: bool,
    tol: &ToleranceConfig,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, f64)> {
    let spec = dirichlet_spectrum(op, tol)?;
    let bracket = Bracket::new(chart.kind, op);
    let n = chart.q.len();
    let gq: Vec<Gradient> = chart.indices.iter().map(|&i| grad_dirichlet_with(op, &spec, i)).collect::<Result<_>>()?;
    let mut gp = Vec::with_capacity(n);
    let mut fd_gap: f64 = 0.0;
    for &i in &chart.indices {
        let g = grad_p_analytic_with(op, &spec, i, chart.kind)?;
        if cross_check {
            let fd = grad_p(op, i, chart.kind, tol)?.gradient;
            let scale = g.0.iter().map(|v| v.abs()).fold(1.0, f64::max);
            fd_gap = fd_gap.max(g.0.iter().zip(&fd.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale);
        }
        gp.push(g);
    }
    let mut qp = vec![vec![0.0; n]; n];
    let mut pp = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            qp[i][j] = bracket.eval(&gq[i], &gp[j])?;
            pp[i][j] = bracket.eval(&gp[i], &gp[j])?;
        }
    }
    Ok((qp, pp, fd_gap))
}

/// Checks `{q_i, p_j} = δ_ij`, `{p_i, p_j} = 0` within `tolerance` with analytic
/// momentum gradients, optionally cross-checked against `grad_p`. Coordinates
/// with `{q_k, p_k} ≈ -1` are moved to the mirror point `-λ_k` and the check is
/// rerun once.
pub fn verify_canonical(
    op: &PeriodicOperator,
    kind: BracketKind,
    tolerance: f64,
    cross_check: bool,
    tol: &ToleranceConfig,
) -> Result<CanonicalReport> {
    let n = op.n();
    let mut flipped = vec![false; n];
    let mut reran = false;
    loop {
        let chart = canonical_chart(op, kind, &flipped, tol)?;
        let (qp, pp, fd_agreement) = canonical_matrices(op, &chart, cross_check, tol)?;
        let qp_defect = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (qp[i][j] - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        let pp_defect = pp.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        if qp_defect < tolerance && pp_defect < tolerance {
            let mirror = canonical_chart(op, kind, &flipped.iter().map(|f| !f).collect::<Vec<_>>(), tol)?;
            let mirror_shift = (0..n).map(|k| chart.q[k] * (chart.p[k] + mirror.p[k])).collect();
            return Ok(CanonicalReport { chart, qp, pp, qp_defect, pp_defect, fd_agreement, mirror_shift, reran });
        }
        let negative: Vec<usize> = (0..n).filter(|&k| (qp[k][k] + 1.0).abs() < tolerance).collect();
        if reran || negative.is_empty() {
            return Err(Error::CanonicityFailure(format!(
                "{} bracket: max |{{q,p}} - δ| = {qp_defect:e}, max |{{p,p}}| = {pp_defect:e}",
                kind.name()
            )));
        }
        for k in negative {
            flipped[k] = !flipped[k];
        }
        reran = true;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnulatorReport {
    /// `max_i |{I_0, c_i}_1| / scale`.
    pub quadratic: f64,
    /// `max_i |{I_N, c_i}_2| / scale`.
    pub cubic: f64,
}

/// Residuals are divided by `max(1, Σ |terms|)` of each bracket evaluation.
pub fn verify_annulator(op: &PeriodicOperator) -> Result<AnnulatorReport> {
    let t = op.period();
    let g0 = grad_i(op, 0)?;
    let gn = grad_i(op, op.n())?;
    let (b1, b2) = (Bracket::new(BracketKind::Quadratic, op), Bracket::new(BracketKind::Cubic, op));
    let mut report = AnnulatorReport { quadratic: 0.0, cubic: 0.0 };
    for i in 0..t {
        let e = Gradient::unit(t, i);
        let (v, s) = b1.eval_with_scale(&g0, &e)?;
        report.quadratic = report.quadratic.max(v.abs() / s.max(1.0));
        let (v, s) = b2.eval_with_scale(&gn, &e)?;
        report.cubic = report.cubic.max(v.abs() / s.max(1.0));
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct LenardMagriReport {
    /// `N + 2` scaled residuals: `{I_0,f}_1`, `{I_k,f}_2 + {I_{k+1},f}_1` for
    /// `k = 0..N`, and `{I_N,f}_2`.
    pub chain: Vec<f64>,
    /// `max |{Δ(λ),f}_2 - λ² {Δ(λ),f}_1|` (scaled) over the sampled `λ`.
    pub generating: f64,
    /// The same with the two brackets exchanged, `λ² {Δ,f}_2 - {Δ,f}_1`.
    pub generating_exchanged: f64,
}

impl LenardMagriReport {
    pub fn max_chain(&self) -> f64 {
        self.chain.iter().copied().fold(0.0, f64::max)
    }
}

/// Lenard–Magri chain and its generating form for one test gradient `gf`.
pub fn lenard_magri_check(op: &PeriodicOperator, gf: &Gradient, lambdas: &[f64]) -> Result<LenardMagriReport> {
    let n = op.n();
    let grads = grad_all_i(op);
    let (b1, b2) = (Bracket::new(BracketKind::Quadratic, op), Bracket::new(BracketKind::Cubic, op));
    let first: Vec<(f64, f64)> = grads.iter().map(|g| b1.eval_with_scale(g, gf)).collect::<Result<_>>()?;
    let second: Vec<(f64, f64)> = grads.iter().map(|g| b2.eval_with_scale(g, gf)).collect::<Result<_>>()?;
    let mut chain = vec![first[0].0.abs() / first[0].1.max(1.0)];
    for k in 0..n {
        let scale = second[k].1 + first[k + 1].1;
        chain.push((second[k].0 + first[k + 1].0).abs() / scale.max(1.0));
    }
    chain.push(second[n].0.abs() / second[n].1.max(1.0));

    let t = op.period() as i32;
    let mut generating: f64 = 0.0;
    let mut exchanged: f64 = 0.0;
    for &lam in lambdas {
        // {Δ(λ), f} = Σ (-1)^i λ^{T-2i} {I_i, f}
        let weight = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 } * lam.powi(t - 2 * i as i32);
        let combine = |v: &[(f64, f64)]| {
            v.iter().enumerate().fold((0.0, 0.0), |(a, s), (i, (x, sx))| (a + weight(i) * x, s + (weight(i) * sx).abs()))
        };
        let (d1, s1) = combine(&first);
        let (d2, s2) = combine(&second);
        let l2 = lam * lam;
        generating = generating.max((d2 - l2 * d1).abs() / (s2 + l2 * s1).max(1.0));
        exchanged = exchanged.max((l2 * d2 - d1).abs() / (l2 * s2 + s1).max(1.0));
    }
    Ok(LenardMagriReport { chain, generating, generating_exchanged: exchanged })
}

/// Gradients with entries uniform in `[-1, 1]`.
pub fn random_gradients(t: usize, count: usize, seed: u64) -> Vec<Gradient> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| Gradient((0..t).map(|_| rng.random_range(-1.0..=1.0)).collect())).collect()
}

/// `λ` samples uniform in `[-r, r]`.
pub fn random_lambdas(count: usize, radius: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(-radius..=radius)).collect()
}

/// Largest `|Σ_cyc {{c_i, c_j}, c_k}| / Σ |terms|` over triples of distinct coordinates.
pub fn jacobi_defect(kind: BracketKind, c: &[f64]) -> f64 {
    let t = c.len();
    let s = StructurePolynomials::new(kind, t);
    let p = s.matrix(c);
    let mut worst: f64 = 0.0;
    for i in 0..t {
        for j in i + 1..t {
            for k in j + 1..t {
                let mut sum = 0.0;
                let mut scale = 0.0;
                for (a, b, d) in [(i, j, k), (j, k, i), (k, i, j)] {
                    // {{c_a, c_b}, c_d} = Σ_l ∂_l P_ab P_ld
                    for l in 0..t {
                        let term = s.partial(a, b, l, c) * p[(l, d)];
                        sum += term;
                        scale += term.abs();
                    }
                }
                if scale > 0.0 {
                    worst = worst.max(sum.abs() / scale);
                }
            }
        }
    }
    worst
}
