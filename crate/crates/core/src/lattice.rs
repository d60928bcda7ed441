//! Periodic zero-diagonal difference operators
//! `(Lψ)_n = a_{n+1} ψ_{n+1} + a_n ψ_{n-1}` of odd period `T = 2N + 1`.
//!
//! The state of the Volterra lattice is the weight vector `c_i = a_i²`.
//! All indices are 0-based and cyclic modulo `T`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A validated periodic operator, immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOperator {
    c: Vec<f64>,
    a: Vec<f64>,
}

impl PeriodicOperator {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        let t = c.len();
        if t < 3 {
            return Err(Error::TooShort(t));
        }
        if t % 2 == 0 {
            return Err(Error::EvenPeriod(t));
        }
        if let Some((index, &value)) = c.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositiveWeight { index, value });
        }
        let a = c.iter().map(|v| v.sqrt()).collect();
        Ok(Self { c, a })
    }

    /// `T = 2N + 1` weights drawn uniformly from `[lo, hi]` with a seeded ChaCha stream.
    pub fn random(n: usize, seed: u64, lo: f64, hi: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidRange("N must be at least 1".into()));
        }
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidRange(format!("need 0 < lo <= hi, got ({lo}, {hi})")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = (0..2 * n + 1)
            .map(|_| if lo == hi { lo } else { rng.random_range(lo..=hi) })
            .collect();
        Self::new(c)
    }

    /// Copy with `c_i` replaced by `c_i + eps`.
    pub fn perturb(&self, i: usize, eps: f64) -> Result<Self> {
        let mut c = self.c.clone();
        let i = i % c.len();
        c[i] += eps;
        Self::new(c)
    }

    pub fn period(&self) -> usize {
        self.c.len()
    }

    /// Genus parameter `N = (T - 1) / 2`.
    pub fn n(&self) -> usize {
        self.c.len() / 2
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Cyclic access, `c_at(i) == c_at(i + T)`.
    pub fn c_at(&self, i: isize) -> f64 {
        self.c[self.wrap(i)]
    }

    pub fn a_at(&self, i: isize) -> f64 {
        self.a[self.wrap(i)]
    }

    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.c.len() as isize) as usize
    }

    pub fn to_file(&self) -> OperatorFile {
        OperatorFile { period: self.period(), c: self.c.clone() }
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: OperatorFile = serde_json::from_str(text)?;
        file.into_operator()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("operator serialization cannot fail")
    }
}

/// On-disk operator format `{"T": <int>, "c": [<floats>]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorFile {
    #[serde(rename = "T")]
    pub period: usize,
    pub c: Vec<f64>,
}

impl OperatorFile {
    pub fn into_operator(self) -> Result<PeriodicOperator> {
        if self.period != self.c.len() {
            return Err(Error::InvalidInput(format!(
                "T = {} disagrees with {} weights",
                self.period,
                self.c.len()
            )));
        }
        PeriodicOperator::new(self.c)
    }
}

/// Numerical tolerances shared by all checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    /// Relative tolerance for identity checks.
    pub eq_tol: f64,
    /// Base finite-difference step.
    pub fd_step: f64,
    /// Minimal root separation for nonsingularity and simple spectra.
    pub sep_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self { eq_tol: 1e-9, fd_step: 1e-6, sep_tol: 1e-8 }
    }
}

impl ToleranceConfig {
    pub fn new(eq_tol: f64, fd_step: f64, sep_tol: f64) -> Result<Self> {
        let cfg = Self { eq_tol, fd_step, sep_tol };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eq_tol", self.eq_tol), ("fd_step", self.fd_step), ("sep_tol", self.sep_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidTolerance(format!("{name} = {v} must be positive")));
            }
        }
        if self.fd_step * self.fd_step <= f64::EPSILON {
            return Err(Error::InvalidTolerance(format!(
                "fd_step = {} is too small, fd_step^2 must exceed machine epsilon",
                self.fd_step
            )));
        }
        Ok(())
    }
}
