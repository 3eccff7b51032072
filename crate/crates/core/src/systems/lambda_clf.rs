//! The backstepping CLF of the ENDI, written as a minimum over an angle
//! `lambda` of a smooth function, and the reduced CLF of the nonholonomic
//! integrator it collapses to.

use std::f64::consts::TAU;

use crate::clf::Clf;
use crate::error::{Result, StabError};

/// `F(phi; lambda) = phi1^2 + phi2^2 + 2 phi3^2 - 2 phi3 (phi1 cos l + phi2 sin l)`.
pub fn f_tilde(phi: &[f64; 3], lambda: f64) -> f64 {
    let (s, c) = lambda.sin_cos();
    phi[0] * phi[0] + phi[1] * phi[1] + 2.0 * phi[2] * phi[2] - 2.0 * phi[2] * (phi[0] * c + phi[1] * s)
}

/// `grad_phi F(phi; lambda)`.
pub fn f_tilde_gradient(phi: &[f64; 3], lambda: f64) -> [f64; 3] {
    let (s, c) = lambda.sin_cos();
    [2.0 * phi[0] - 2.0 * phi[2] * c, 2.0 * phi[1] - 2.0 * phi[2] * s, 4.0 * phi[2] - 2.0 * (phi[0] * c + phi[1] * s)]
}

/// Virtual control `-(<grad F, g1>, <grad F, g2>)` with `g1 = (1, 0, -phi2)`
/// and `g2 = (0, 1, phi1)`.
pub fn kappa_lambda(phi: &[f64; 3], lambda: f64) -> [f64; 2] {
    let g = f_tilde_gradient(phi, lambda);
    [-(g[0] - phi[1] * g[2]), -(g[1] + phi[0] * g[2])]
}

/// `phi1^2 + phi2^2 + 2 phi3^2 - 2 |phi3| sqrt(phi1^2 + phi2^2)`.
pub fn ni_clf_reduced(phi: &[f64; 3]) -> f64 {
    let rho2 = phi[0] * phi[0] + phi[1] * phi[1];
    rho2 + 2.0 * phi[2] * phi[2] - 2.0 * phi[2].abs() * rho2.sqrt()
}

/// [`ni_clf_reduced`] as a CLF on R^3.
#[derive(Clone, Copy, Debug, Default)]
pub struct NiReducedClf;

impl Clf for NiReducedClf {
    fn dim(&self) -> usize {
        3
    }
    fn value(&self, x: &[f64]) -> f64 {
        ni_clf_reduced(&[x[0], x[1], x[2]])
    }
}

/// Minimize a 2pi-periodic function: uniform grid scan, then golden-section
/// refinement on the two cells around the best grid point. Returns
/// `(value, argmin in [0, 2pi))`.
pub fn minimize_over_lambda<F: Fn(f64) -> f64>(f: F, grid_size: usize, tol: f64) -> (f64, f64) {
    let step = TAU / grid_size as f64;
    let (mut best_i, mut best_v) = (0, f64::INFINITY);
    for i in 0..grid_size {
        let v = f(step * i as f64);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    refine(&f, step * best_i as f64, best_v, step, tol)
}

fn refine<F: Fn(f64) -> f64>(f: &F, center: f64, center_v: f64, half: f64, tol: f64) -> (f64, f64) {
    let (lam, v) = golden_section(f, center - half, center + half, tol);
    if v < center_v {
        (v, lam.rem_euclid(TAU))
    } else {
        (center_v, center.rem_euclid(TAU))
    }
}

/// Golden-section search for a minimum of `f` on `[a, b]`, stopping once the
/// bracket is narrower than `tol`.
fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// The ENDI CLF
/// `L(x) = min_lambda F(phi; lambda) + 1/2 |eta - kappa(phi; lambda)|^2`
/// with `x = (phi, eta)`.
#[derive(Clone, Debug)]
pub struct LambdaClf {
    grid_size: usize,
    refine_tol: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Default for LambdaClf {
    /// 360-point grid, golden-section tolerance 1e-10.
    fn default() -> Self {
        Self::new(360, 1e-10).expect("valid defaults")
    }
}

/// The objective as a quadratic form in `(cos l, sin l)`. The virtual control
/// is affine in `(cos l, sin l)`, so the penalty term is too after squaring.
#[derive(Clone, Copy, Debug)]
struct TrigQuadratic {
    c0: f64,
    c: f64,
    s: f64,
    cc: f64,
    cs: f64,
    ss: f64,
}

impl TrigQuadratic {
    fn from_state(x: &[f64]) -> Self {
        let (p1, p2, p3, e1, e2) = (x[0], x[1], x[2], x[3], x[4]);
        // kappa = k0 + cos(l) kc + sin(l) ks
        let k0 = [-(2.0 * p1 - 4.0 * p2 * p3), -(2.0 * p2 + 4.0 * p1 * p3)];
        let kc = [-(2.0 * p1 * p2 - 2.0 * p3), 2.0 * p1 * p1];
        let ks = [-2.0 * p2 * p2, 2.0 * p3 + 2.0 * p1 * p2];
        let d0 = [e1 - k0[0], e2 - k0[1]];
        Self {
            c0: p1 * p1 + p2 * p2 + 2.0 * p3 * p3 + 0.5 * (d0[0] * d0[0] + d0[1] * d0[1]),
            c: -2.0 * p1 * p3 - (d0[0] * kc[0] + d0[1] * kc[1]),
            s: -2.0 * p2 * p3 - (d0[0] * ks[0] + d0[1] * ks[1]),
            cc: 0.5 * (kc[0] * kc[0] + kc[1] * kc[1]),
            cs: kc[0] * ks[0] + kc[1] * ks[1],
            ss: 0.5 * (ks[0] * ks[0] + ks[1] * ks[1]),
        }
    }

    #[inline]
    fn eval(&self, c: f64, s: f64) -> f64 {
        self.c0 + self.c * c + self.s * s + self.cc * c * c + self.cs * c * s + self.ss * s * s
    }
}

impl LambdaClf {
    pub fn new(grid_size: usize, refine_tol: f64) -> Result<Self> {
        if grid_size < 64 {
            return Err(StabError::Config(format!("lambda grid needs >= 64 points, got {grid_size}")));
        }
        if !(refine_tol > 0.0) {
            return Err(StabError::Config("refine tolerance must be positive".into()));
        }
        let step = TAU / grid_size as f64;
        let (sin, cos) = (0..grid_size).map(|i| (step * i as f64).sin_cos()).unzip();
        Ok(Self { grid_size, refine_tol, cos, sin })
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn refine_tol(&self) -> f64 {
        self.refine_tol
    }

    /// `(L(x), lambda*)`.
    pub fn evaluate(&self, x: &[f64]) -> (f64, f64) {
        let q = TrigQuadratic::from_state(x);
        let (mut best_i, mut best_v) = (0, f64::INFINITY);
        for (i, (c, s)) in self.cos.iter().zip(&self.sin).enumerate() {
            let v = q.eval(*c, *s);
            if v < best_v {
                best_v = v;
                best_i = i;
            }
        }
        let step = TAU / self.grid_size as f64;
        let f = |lam: f64| {
            let (s, c) = lam.sin_cos();
            q.eval(c, s)
        };
        refine(&f, step * best_i as f64, best_v, step, self.refine_tol)
    }

    /// The unminimized objective at a fixed `lambda`, from the explicit
    /// formulas.
    pub fn objective(x: &[f64], lambda: f64) -> f64 {
        let phi = [x[0], x[1], x[2]];
        let k = kappa_lambda(&phi, lambda);
        let d = [x[3] - k[0], x[4] - k[1]];
        f_tilde(&phi, lambda) + 0.5 * (d[0] * d[0] + d[1] * d[1])
    }
}

impl Clf for LambdaClf {
    fn dim(&self) -> usize {
        5
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.evaluate(x).0
    }
}
