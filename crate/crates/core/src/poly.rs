//! Dense real polynomials in one variable, coefficients in ascending powers.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    /// Trailing exact zeros are dropped; the zero polynomial keeps a single `0.0`.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::new(vec![0.0])
    }

    pub fn constant(v: f64) -> Self {
        Self::new(vec![v])
    }

    /// `v · λ^power`.
    pub fn monomial(v: f64, power: usize) -> Self {
        let mut coeffs = vec![0.0; power + 1];
        coeffs[power] = v;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `λ^k`, zero beyond the stored degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    /// Drops leading coefficients whose magnitude is below `tol` times the largest one.
    pub fn trimmed(&self, tol: f64) -> Self {
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut coeffs = self.coeffs.clone();
        while coeffs.len() > 1 && coeffs.last().unwrap().abs() <= tol * scale {
            coeffs.pop();
        }
        Self::new(coeffs)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and first derivative by Horner's scheme.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero();
        }
        Self::new(self.coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `p(-λ)`.
    pub fn reflect(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| if k % 2 == 1 { -c } else { c })
                .collect(),
        )
    }

    /// Complex roots from the eigenvalues of the companion matrix, refined by Newton steps.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let n = self.degree();
        if self.is_zero() {
            return Err(Error::RootFindingFailure("zero polynomial".into()));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let lead = self.leading();
        let monic: Vec<f64> = self.coeffs.iter().map(|c| c / lead).collect();
        // rescale λ = s·μ so the monic coefficients are O(1)
        let s = (0..n)
            .map(|k| monic[k].abs().powf(1.0 / (n - k) as f64))
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let scaled: Vec<f64> = (0..n).map(|k| monic[k] / s.powi((n - k) as i32)).collect();

        let mut companion = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            companion[(i, n - 1)] = -scaled[i];
        }
        balance(&mut companion);
        let mut roots: Vec<Complex64> = match Schur::try_new(companion, f64::EPSILON, 10_000) {
            Some(schur) => {
                let mut r: Vec<Complex64> = schur.complex_eigenvalues().iter().map(|z| z * s).collect();
                self.refine(&mut r, 20);
                r
            }
            None => {
                // shifted QR can stall on highly structured companions (e.g. even
                // polynomials); Aberth from a circle converges for those
                let radius = 2.0 * s;
                let mut r: Vec<Complex64> = (0..n)
                    .map(|k| Complex64::from_polar(radius, (2.0 * k as f64 + 0.5) * std::f64::consts::PI / n as f64))
                    .collect();
                self.refine(&mut r, 500);
                r
            }
        };
        let worst = roots.iter().map(|z| self.eval_complex(*z).norm() / self.magnitude_at(*z)).fold(0.0, f64::max);
        if !(worst < 1e-6) {
            return Err(Error::RootFindingFailure(format!("root residual {worst:e} (degree {n})")));
        }
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok(roots)
    }

    /// `Σ |c_k| |z|^k`, the natural scale of rounding errors in `p(z)`.
    fn magnitude_at(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.abs()).max(f64::MIN_POSITIVE)
    }

    /// Simultaneous Aberth–Ehrlich refinement; each step is kept only if it
    /// lowers the residual, so clustered roots cannot collapse onto each other.
    fn refine(&self, roots: &mut [Complex64], max_iter: usize) {
        for _ in 0..max_iter {
            let mut moved = false;
            for k in 0..roots.len() {
                let z = roots[k];
                let (p, dp) = self.eval_with_derivative(z);
                if p.norm() == 0.0 || dp.norm() == 0.0 {
                    continue;
                }
                let newton = p / dp;
                let repulsion: Complex64 = roots
                    .iter()
                    .enumerate()
                    .filter(|(j, w)| *j != k && (z - **w).norm() > 0.0)
                    .map(|(_, w)| 1.0 / (z - w))
                    .sum();
                let step = newton / (1.0 - newton * repulsion);
                let candidate = z - step;
                if !candidate.is_finite() {
                    continue;
                }
                let (pc, _) = self.eval_with_derivative(candidate);
                if pc.norm() < p.norm() {
                    roots[k] = candidate;
                    moved |= step.norm() > 4.0 * f64::EPSILON * z.norm().max(1.0);
                }
            }
            if !moved {
                break;
            }
        }
    }
}

/// Parlett–Reinsch balancing by powers of two, applied in place.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let radix = 2.0f64;
    loop {
        let mut converged = true;
        for i in 0..n {
            let (mut col, mut row) = (0.0, 0.0);
            for j in 0..n {
                if j != i {
                    col += m[(j, i)].abs();
                    row += m[(i, j)].abs();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let total = col + row;
            let mut f = 1.0;
            let (mut c, mut r) = (col, row);
            while c < r / radix {
                c *= radix;
                r /= radix;
                f *= radix;
            }
            while c >= r * radix {
                c /= radix;
                r *= radix;
                f /= radix;
            }
            if (c + r) < 0.95 * total {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
        if converged {
            break;
        }
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}
