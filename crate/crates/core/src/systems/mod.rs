//! Benchmark plants, the backstepping CLF for the extended nonholonomic
//! double integrator, and bounded noise generators.

mod lambda_clf;
mod noise;

pub use lambda_clf::{
    f_tilde, f_tilde_gradient, kappa_lambda, minimize_over_lambda, ni_clf_reduced, LambdaClf, NiReducedClf,
};
pub use noise::{NoiseMode, NoiseModel};

use serde::{Deserialize, Serialize};

use crate::clf::Clf;
use crate::error::{Result, StabError};
use crate::vector::StateVec;

/// Per-channel closed input intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputBox(Vec<(f64, f64)>);

impl InputBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(StabError::Config("input box needs at least one channel".into()));
        }
        for &(lo, hi) in &bounds {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(StabError::Config(format!("invalid input interval [{lo}, {hi}]")));
            }
        }
        Ok(Self(bounds))
    }

    /// `[-a, a]^m`
    pub fn symmetric(m: usize, a: f64) -> Self {
        Self(vec![(-a, a); m])
    }

    pub fn channels(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.0.len() && u.iter().zip(&self.0).all(|(v, (lo, hi))| lo <= v && v <= hi)
    }
}

/// `x' = f(x, u)` with `u` constrained to a box.
pub trait ControlledSystem: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_box(&self) -> &InputBox;
    /// Writes `f(x, u)` into `out`.
    fn eval_into(&self, x: &[f64], u: &[f64], out: &mut [f64]);

    fn input_dim(&self) -> usize {
        self.input_box().dim()
    }

    fn eval(&self, x: &[f64], u: &[f64]) -> StateVec {
        let mut out = StateVec::zeros(self.state_dim());
        self.eval_into(x, u, &mut out);
        out
    }
}

/// Brockett's nonholonomic integrator, `phi' = g1(phi) w1 + g2(phi) w2`.
#[derive(Clone, Debug)]
pub struct NonholonomicIntegrator {
    input_box: InputBox,
}

impl NonholonomicIntegrator {
    pub fn new(input_box: InputBox) -> Self {
        Self { input_box }
    }
}

impl Default for NonholonomicIntegrator {
    fn default() -> Self {
        Self::new(InputBox::symmetric(2, 1.0))
    }
}

pub fn ni_dynamics(phi: &[f64; 3], omega: &[f64; 2]) -> [f64; 3] {
    [omega[0], omega[1], phi[0] * omega[1] - phi[1] * omega[0]]
}

impl ControlledSystem for NonholonomicIntegrator {
    fn state_dim(&self) -> usize {
        3
    }
    fn input_box(&self) -> &InputBox {
        &self.input_box
    }
    fn eval_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
        out[1] = u[1];
        out[2] = x[0] * u[1] - x[1] * u[0];
    }
}

/// Extended nonholonomic double integrator with state
/// `(phi1, phi2, phi3, eta1, eta2)`.
#[derive(Clone, Debug)]
pub struct Endi {
    input_box: InputBox,
}

impl Endi {
    pub fn new(input_box: InputBox) -> Self {
        Self { input_box }
    }
}

impl Default for Endi {
    fn default() -> Self {
        Self::new(InputBox::symmetric(2, 1.0))
    }
}

pub fn endi_dynamics(x: &[f64; 5], u: &[f64; 2]) -> [f64; 5] {
    let mut out = [0.0; 5];
    endi_into(x, u, &mut out);
    out
}

#[inline]
fn endi_into(x: &[f64], u: &[f64], out: &mut [f64]) {
    out[0] = x[3];
    out[1] = x[4];
    out[2] = x[0] * x[4] - x[3] * x[1];
    out[3] = u[0];
    out[4] = u[1];
}

impl ControlledSystem for Endi {
    fn state_dim(&self) -> usize {
        5
    }
    fn input_box(&self) -> &InputBox {
        &self.input_box
    }
    fn eval_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        endi_into(x, u, out);
    }
}

/// `x' = u` in R^n, the toy plant of most unit tests.
#[derive(Clone, Debug)]
pub struct SingleIntegrator {
    input_box: InputBox,
}

impl SingleIntegrator {
    pub fn new(input_box: InputBox) -> Self {
        Self { input_box }
    }
}

impl ControlledSystem for SingleIntegrator {
    fn state_dim(&self) -> usize {
        self.input_box.dim()
    }
    fn input_box(&self) -> &InputBox {
        &self.input_box
    }
    fn eval_into(&self, _x: &[f64], u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(u);
    }
}

/// Closure-backed system.
pub struct FnSystem<F> {
    n: usize,
    input_box: InputBox,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(n: usize, input_box: InputBox, f: F) -> Self {
        Self { n, input_box, f }
    }
}

impl<F> ControlledSystem for FnSystem<F>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync,
{
    fn state_dim(&self) -> usize {
        self.n
    }
    fn input_box(&self) -> &InputBox {
        &self.input_box
    }
    fn eval_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        (self.f)(x, u, out)
    }
}

/// Systems selectable by name in config files: `ni`, `endi`.
pub fn system_by_name(name: &str, input_box: InputBox) -> Result<Box<dyn ControlledSystem>> {
    let sys: Box<dyn ControlledSystem> = match name {
        "ni" => Box::new(NonholonomicIntegrator::new(input_box)),
        "endi" => Box::new(Endi::new(input_box)),
        other => return Err(StabError::Config(format!("unknown system '{other}'"))),
    };
    if sys.input_dim() != 2 {
        return Err(StabError::Config(format!("system '{name}' takes 2 inputs")));
    }
    Ok(sys)
}

/// CLFs selectable by name: `endi-clf` (5 states), `ni-clf` (3 states).
pub fn clf_by_name(name: &str) -> Result<Box<dyn Clf>> {
    match name {
        "endi-clf" => Ok(Box::new(LambdaClf::default())),
        "ni-clf" => Ok(Box::new(NiReducedClf)),
        other => Err(StabError::Config(format!("unknown CLF '{other}'"))),
    }
}
