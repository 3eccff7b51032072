//! Control-Lyapunov-function abstraction and the numerical estimators built
//! on top of it: lower directional derivatives, Lipschitz constants,
//! K-infinity envelopes, nested ball radii and the minimum decay rate.

mod decay;
mod envelope;
mod lipschitz;
mod radii;

pub use decay::{estimate_min_decay, DecayOptions};
pub use envelope::{fit_kinfty_envelope, shell_samples, Curve, KInftyEnvelope, ShellSample};
pub use lipschitz::{
    estimate_dynamics_bound, estimate_lipschitz_dynamics, estimate_lipschitz_l, estimate_lipschitz_l_with,
    LIPSCHITZ_SAFETY,
};
pub use radii::{compute_ball_radii, BallRadii, RadiiOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Result, StabError};

/// A (possibly nonsmooth) Lyapunov candidate on R^n.
pub trait Clf: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
}

impl<T: Clf + ?Sized> Clf for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
}

impl<T: Clf + ?Sized> Clf for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
}

/// Closure-backed CLF, mostly for tests and toy problems.
pub struct FnClf<F> {
    dim: usize,
    f: F,
}

impl<F> FnClf<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Clf for FnClf<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// `||x||^2` on R^n.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticClf {
    pub dim: usize,
}

impl Clf for QuadraticClf {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        crate::vector::norm_sq(x)
    }
}

/// Step sizes for the finite-sample liminf in the lower directional
/// derivative. Strictly positive and strictly decreasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuGrid(Vec<f64>);

impl MuGrid {
    pub fn new(mus: Vec<f64>) -> Result<Self> {
        if mus.is_empty() {
            return Err(StabError::Config("empty mu grid".into()));
        }
        if mus.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(StabError::Config("mu grid entries must be positive".into()));
        }
        if mus.windows(2).any(|w| w[1] >= w[0]) {
            return Err(StabError::Config("mu grid must be strictly decreasing toward 0".into()));
        }
        Ok(Self(mus))
    }

    /// `count` geometrically spaced values from `hi` down to `lo`.
    pub fn geometric(hi: f64, lo: f64, count: usize) -> Result<Self> {
        if count < 2 || !(hi > lo && lo > 0.0) {
            return Err(StabError::Config(format!("invalid geometric mu grid: hi={hi}, lo={lo}, count={count}")));
        }
        let ratio = (lo / hi).powf(1.0 / (count - 1) as f64);
        let mut mus: Vec<f64> = (0..count).map(|i| hi * ratio.powi(i as i32)).collect();
        mus[count - 1] = lo;
        Self::new(mus)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|m| m * c).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn max(&self) -> f64 {
        self.0[0]
    }
}

impl Default for MuGrid {
    /// {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}
    fn default() -> Self {
        Self(vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    }
}

/// Finite-sample lower directional generalized derivative:
/// `min_mu (L(x + mu*theta) - L(x)) / mu` over the grid.
pub fn ldgd_estimate<C: Clf + ?Sized>(clf: &C, x: &[f64], theta: &[f64], mu_grid: &MuGrid) -> Result<f64> {
    let mut probe = vec![0.0; x.len()];
    ldgd_with_buffer(clf, x, clf.value(x), theta, mu_grid, &mut probe)
}

/// Same as [`ldgd_estimate`] with `L(x)` already known and a caller-owned
/// scratch buffer, for inner loops.
pub(crate) fn ldgd_with_buffer<C: Clf + ?Sized>(
    clf: &C,
    x: &[f64],
    lx: f64,
    theta: &[f64],
    mu_grid: &MuGrid,
    probe: &mut [f64],
) -> Result<f64> {
    if !lx.is_finite() {
        return Err(StabError::NumericDomain(format!("L(x) = {lx} at x = {x:?}")));
    }
    let mut best = f64::INFINITY;
    for &mu in mu_grid.as_slice() {
        crate::vector::axpy_into(x, mu, theta, probe);
        let lp = clf.value(probe);
        if !lp.is_finite() {
            return Err(StabError::NumericDomain(format!("L = {lp} at x + {mu}*theta")));
        }
        best = best.min((lp - lx) / mu);
    }
    Ok(best)
}

/// Flat key-value record of an estimator run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub entries: Vec<(String, f64)>,
    pub samples: u64,
    pub seed: u64,
}

impl EstimatorReport {
    pub fn push(&mut self, key: impl Into<String>, value: f64) {
        self.entries.push((key.into(), value));
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    /// `key=value` lines, one per entry.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(&format!("{k}={v}\n"));
        }
        out.push_str(&format!("samples={}\nseed={}\n", self.samples, self.seed));
        out
    }
}

/// Regularity constants consumed by the bound formulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityConstants {
    /// Lipschitz constant of L on the overshoot ball.
    pub lip_l: f64,
    /// Lipschitz constant of f in x, uniformly over U.
    pub lip_f: f64,
    /// Minimum decay rate over the annulus.
    pub w_bar: f64,
    /// Bound on the closed-loop vector field.
    pub m_dyn: f64,
}

impl RegularityConstants {
    pub fn new(lip_l: f64, lip_f: f64, w_bar: f64, m_dyn: f64) -> Result<Self> {
        let c = Self { lip_l, lip_f, w_bar, m_dyn };
        for (name, v) in [("lip_l", lip_l), ("lip_f", lip_f), ("w_bar", w_bar), ("m_dyn", m_dyn)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(StabError::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(c)
    }

    pub fn report(&self) -> EstimatorReport {
        let mut r = EstimatorReport::default();
        r.push("lip_l", self.lip_l);
        r.push("lip_f", self.lip_f);
        r.push("w_bar", self.w_bar);
        r.push("m_dyn", self.m_dyn);
        r
    }
}
