use serde::{Deserialize, Serialize};

use super::Clf;
use crate::error::{Result, StabError};
use crate::rng::{self, StreamTag};
use crate::vector::norm;

/// Relative margin pushing the fitted curves away from the sampled extrema.
pub const ENVELOPE_MARGIN: f64 = 0.05;

/// A strictly increasing function on [0, inf) with value 0 at 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Curve {
    /// `coef * r^exponent`.
    Power { coef: f64, exponent: f64 },
    /// Linear interpolation through (0, 0) and the knots; extended past the
    /// last knot with the last segment's slope.
    PiecewiseLinear { radii: Vec<f64>, values: Vec<f64> },
}

impl Curve {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Curve::Power { coef, exponent } => {
                if *exponent == 2.0 {
                    coef * r * r
                } else {
                    coef * r.powf(*exponent)
                }
            }
            Curve::PiecewiseLinear { radii, values } => {
                let k = radii.partition_point(|&ri| ri < r);
                let (r0, v0, r1, v1) = if k == 0 {
                    (0.0, 0.0, radii[0], values[0])
                } else if k < radii.len() {
                    (radii[k - 1], values[k - 1], radii[k], values[k])
                } else if radii.len() >= 2 {
                    let m = radii.len();
                    (radii[m - 2], values[m - 2], radii[m - 1], values[m - 1])
                } else {
                    (0.0, 0.0, radii[0], values[0])
                };
                v0 + (v1 - v0) * (r - r0) / (r1 - r0)
            }
        }
    }

    /// Inverse by bisection. Exact whenever a bisection midpoint hits the
    /// target value exactly.
    pub fn inverse(&self, value: f64) -> f64 {
        if value <= 0.0 {
            return 0.0;
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.eval(hi) < value {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let v = self.eval(mid);
            if v == value {
                return mid;
            }
            if v < value {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Class-K-infinity bounds `alpha1(|x|) <= L(x) <= alpha2(|x|)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KInftyEnvelope {
    pub alpha1: Curve,
    pub alpha2: Curve,
    /// Raw shell extrema needed a monotone repair.
    pub monotonized: bool,
    pub samples: u64,
}

impl KInftyEnvelope {
    /// Exact power-law envelope `c1 r^2 <= L <= c2 r^2`.
    pub fn quadratic(c1: f64, c2: f64) -> Self {
        Self {
            alpha1: Curve::Power { coef: c1, exponent: 2.0 },
            alpha2: Curve::Power { coef: c2, exponent: 2.0 },
            monotonized: false,
            samples: 0,
        }
    }

    pub fn alpha1(&self, r: f64) -> f64 {
        self.alpha1.eval(r)
    }
    pub fn alpha2(&self, r: f64) -> f64 {
        self.alpha2.eval(r)
    }
    pub fn alpha1_inv(&self, v: f64) -> f64 {
        self.alpha1.inverse(v)
    }
    pub fn alpha2_inv(&self, v: f64) -> f64 {
        self.alpha2.inverse(v)
    }

    /// True when every sample satisfies the sandwich inequality.
    pub fn brackets(&self, samples: &[ShellSample]) -> bool {
        samples.iter().all(|s| self.alpha1(s.norm) <= s.value && s.value <= self.alpha2(s.norm))
    }
}

/// One calibration sample: its shell, its actual norm and `L` there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellSample {
    pub shell: usize,
    pub norm: f64,
    pub value: f64,
}

/// The calibration samples used by [`fit_kinfty_envelope`].
pub fn shell_samples<C: Clf + ?Sized>(
    clf: &C,
    shell_radii: &[f64],
    samples_per_shell: usize,
    seed: u64,
) -> Vec<ShellSample> {
    let n = clf.dim();
    let mut out = Vec::with_capacity(shell_radii.len() * samples_per_shell);
    for (i, &r) in shell_radii.iter().enumerate() {
        let mut rng = rng::stream(seed, StreamTag::EnvelopeShells, i as u64, 0);
        for _ in 0..samples_per_shell {
            let x = rng::on_sphere(&mut rng, n, r);
            out.push(ShellSample { shell: i, norm: norm(&x), value: clf.value(&x) });
        }
    }
    out
}

/// Fit piecewise-linear K-infinity envelopes through sampled shell minima and
/// maxima of `L`.
pub fn fit_kinfty_envelope<C: Clf + ?Sized>(
    clf: &C,
    shell_radii: &[f64],
    samples_per_shell: usize,
    seed: u64,
) -> Result<KInftyEnvelope> {
    if shell_radii.is_empty() || samples_per_shell == 0 {
        return Err(StabError::Config("envelope fit needs shells and samples".into()));
    }
    if shell_radii[0] <= 0.0 || shell_radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(StabError::Config("shell radii must be positive and strictly increasing".into()));
    }
    let samples = shell_samples(clf, shell_radii, samples_per_shell, seed);
    let m = shell_radii.len();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for s in &samples {
        if !s.value.is_finite() {
            return Err(StabError::NumericDomain(format!("L is not finite on shell {}", s.shell)));
        }
        lo[s.shell] = lo[s.shell].min(s.value);
        hi[s.shell] = hi[s.shell].max(s.value);
    }
    if lo[0] <= 0.0 {
        return Err(StabError::NumericDomain(format!("L is not positive on the shell of radius {}", shell_radii[0])));
    }

    let mut a1: Vec<f64> = lo.iter().map(|v| v * (1.0 - ENVELOPE_MARGIN)).collect();
    let mut a2: Vec<f64> = hi.iter().map(|v| v * (1.0 + ENVELOPE_MARGIN)).collect();
    let mut monotonized = false;
    // Lower curve: running minimum from the outside in, then strict.
    for i in (0..m.saturating_sub(1)).rev() {
        if a1[i] >= a1[i + 1] {
            if a1[i] > a1[i + 1] {
                monotonized = true;
            }
            a1[i] = a1[i + 1] * (1.0 - 1e-9);
        }
    }
    // Upper curve: running maximum from the inside out, then strict.
    for i in 1..m {
        if a2[i] <= a2[i - 1] {
            if a2[i] < a2[i - 1] {
                monotonized = true;
            }
            a2[i] = a2[i - 1] * (1.0 + 1e-9);
        }
    }

    let env = KInftyEnvelope {
        alpha1: Curve::PiecewiseLinear { radii: shell_radii.to_vec(), values: a1 },
        alpha2: Curve::PiecewiseLinear { radii: shell_radii.to_vec(), values: a2 },
        monotonized,
        samples: samples.len() as u64,
    };
    if !env.brackets(&samples) {
        return Err(StabError::NumericDomain("fitted envelope does not bracket its calibration samples".into()));
    }
    Ok(env)
}
