//! Closed-form robustness and sampling bounds for the three methods.

use serde::{Deserialize, Serialize};

use crate::clf::{BallRadii, RegularityConstants};
use crate::controllers::Method;
use crate::error::{Result, StabError};

/// Everything the bound formulas consume.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub constants: RegularityConstants,
    pub delta: f64,
    /// Dini-aiming radius.
    pub r: f64,
    /// Inf-convolution parameter.
    pub alpha: f64,
    /// Structural constants of the inf-convolution disturbance bound.
    pub c1: f64,
    pub c2: f64,
    pub ell1: f64,
    pub ell2: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub eps4: f64,
    /// Minimal decay used by the Dini-aiming sampling bounds.
    pub c: f64,
}

impl BoundInputs {
    /// Geometry taken from the ball radii: `ell1 = ell_hat / 2`,
    /// `ell2 = L_hat_star`, all epsilon terms `S_star`, `c = w_bar / 2`,
    /// `c1 = c2 = 1`.
    pub fn from_radii(constants: RegularityConstants, radii: &BallRadii, delta: f64, r: f64, alpha: f64) -> Self {
        Self {
            constants,
            delta,
            r,
            alpha,
            c1: 1.0,
            c2: 1.0,
            ell1: radii.ell_hat / 2.0,
            ell2: radii.l_hat_star,
            eps2: radii.big_s_star,
            eps3: radii.big_s_star,
            eps4: radii.big_s_star,
            c: constants.w_bar / 2.0,
        }
    }

    fn lip_l(&self) -> f64 {
        self.constants.lip_l
    }
    fn lip_f(&self) -> f64 {
        self.constants.lip_f
    }
    fn w_bar(&self) -> f64 {
        self.constants.w_bar
    }
}

/// Upper bounds on sampling period and aiming radius for Dini aiming, with
/// the intermediate quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiaSamplingBounds {
    pub delta_bar: f64,
    pub r_bar: f64,
    pub t1: f64,
    pub m: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub quadratic_term: f64,
}

/// Residual of the `T1` condition, non-negative where it holds:
/// `r - sqrt(r^2 - r c T / (4 LipL)) - c T / (16 LipL)`.
pub fn t1_residual(c: f64, r: f64, lip_l: f64, t: f64) -> f64 {
    let radicand = (r * r - r * c * t / (4.0 * lip_l)).max(0.0);
    r - radicand.sqrt() - c * t / (16.0 * lip_l)
}

pub fn dia_sampling_bounds(inp: &BoundInputs) -> Result<DiaSamplingBounds> {
    let (lip_l, lip_f, c, r) = (inp.lip_l(), inp.lip_f(), inp.c, inp.r);
    for (name, v) in [
        ("c", c),
        ("r", r),
        ("LipL", lip_l),
        ("Lipf", lip_f),
        ("eps2", inp.eps2),
        ("eps3", inp.eps3),
        ("eps4", inp.eps4),
        ("M~", inp.constants.m_dyn),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(StabError::BoundInfeasible(format!("{name} must be positive, got {v}")));
        }
    }
    if !(inp.ell2 > inp.ell1) {
        return Err(StabError::BoundInfeasible(format!("need ell2 > ell1, got {} and {}", inp.ell2, inp.ell1)));
    }
    let m = inp.constants.m_dyn + c / (2.0 * lip_l);
    let a1 = m * m * lip_l;
    let a2 = m * (m + r * lip_f);
    let a3 = c * r / (4.0 * lip_l);
    let t1 = largest_t1(c, r, lip_l)?;
    let quadratic_term = ((a2 * a2 + 4.0 * a1 * a3).sqrt() - a2) / (2.0 * a1);
    let delta_bar = t1.min((inp.ell2 - inp.ell1) / (lip_l * m)).min(inp.eps3 / m).min(quadratic_term);
    let r_bar = (inp.eps2 / lip_l).min(inp.eps3).min(inp.eps4).min(c / (lip_f * lip_l));
    Ok(DiaSamplingBounds { delta_bar, r_bar, t1, m, a1, a2, a3, quadratic_term })
}

/// Largest `T` in `(0, 4 LipL r / c]` satisfying the `T1` condition, by
/// bisection on the feasibility boundary.
fn largest_t1(c: f64, r: f64, lip_l: f64) -> Result<f64> {
    let t_max = 4.0 * lip_l * r / c;
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(StabError::BoundInfeasible(format!("empty T1 bracket (0, {t_max}]")));
    }
    if t1_residual(c, r, lip_l, t_max) >= 0.0 {
        return Ok(t_max);
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if t1_residual(c, r, lip_l, mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 {
        return Err(StabError::BoundInfeasible("T1 condition fails near 0".into()));
    }
    Ok(lo)
}

/// Admissible measurement-error / disturbance bounds of one method.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessEnvelope {
    pub method: Method,
    pub e_max: f64,
    pub q_max: f64,
    /// `e_max` depends on `q_bar` (Dini aiming only).
    pub coupled: bool,
    /// The coupled bound is exhausted: no admissible `e_bar` for this `q_bar`.
    pub empty: bool,
    /// `q_max` depends on unspecified structural constants (inf-convolution).
    pub structural: bool,
}

pub fn table1_envelope(method: Method, inp: &BoundInputs, q_bar: f64) -> Result<RobustnessEnvelope> {
    if !(q_bar >= 0.0) {
        return Err(StabError::Config(format!("q_bar must be non-negative, got {q_bar}")));
    }
    let (d, w, ll, lf) = (inp.delta, inp.w_bar(), inp.lip_l(), inp.lip_f());
    Ok(match method {
        Method::Dia => {
            let e = d * w / (4.0 * ll * (2.0 + d * lf)) - d * q_bar / (2.0 + d * lf);
            RobustnessEnvelope {
                method,
                e_max: e.max(0.0),
                q_max: w / (4.0 * ll),
                coupled: true,
                empty: e < 0.0,
                structural: false,
            }
        }
        Method::Obc => RobustnessEnvelope {
            method,
            e_max: d * w / (4.0 * ll * (1.0 + d * lf)),
            q_max: w / (4.0 * ll),
            coupled: false,
            empty: false,
            structural: false,
        },
        Method::Infc => RobustnessEnvelope {
            method,
            e_max: d * w / (16.0 * ll),
            q_max: inp.c1 * w * inp.alpha + inp.c2 * lf,
            coupled: false,
            empty: false,
            structural: true,
        },
    })
}

/// Guaranteed upper bound on the per-step CLF change under OBC with both
/// error sources: `-delta w/2 + LipL (1 + delta Lipf) e + delta LipL q`.
pub fn obc_decay_margin(inp: &BoundInputs, e_bar: f64, q_bar: f64) -> f64 {
    let (d, ll, lf) = (inp.delta, inp.lip_l(), inp.lip_f());
    -d * inp.w_bar() / 2.0 + ll * (1.0 + d * lf) * e_bar + d * ll * q_bar
}

/// Disturbance bound for OBC that yields a decay of `3/8 delta w` when the
/// measurement error sits at the inf-convolution bound. May be negative.
pub fn obc_fairness_q_bound(inp: &BoundInputs) -> f64 {
    let (d, w, ll, lf) = (inp.delta, inp.w_bar(), inp.lip_l(), inp.lip_f());
    w / (d * ll) * (d / 8.0 - (1.0 + d * lf) / 16.0)
}

/// Right-hand side minus `e_bar` of the coupled Dini-aiming condition.
pub fn dia_coupling_slack(inp: &BoundInputs, e_bar: f64, q_bar: f64) -> f64 {
    let (d, w, ll, lf) = (inp.delta, inp.w_bar(), inp.lip_l(), inp.lip_f());
    d * w / (4.0 * ll * (2.0 + d * lf)) - d / (2.0 + d * lf) * q_bar - e_bar
}

/// Bound on the disturbance seen after absorbing the measurement error into
/// the dynamics: `Lipf e + 2 e / delta + q`, with `2 e / delta` a Lipschitz
/// constant of the piecewise-constant error signal.
pub fn dia_transformed_disturbance(inp: &BoundInputs, e_bar: f64, q_bar: f64) -> f64 {
    inp.lip_f() * e_bar + 2.0 * e_bar / inp.delta + q_bar
}

/// Whether `(e_bar, q_bar)` satisfies the coupled Dini-aiming condition.
pub fn dia_coupling_check(inp: &BoundInputs, e_bar: f64, q_bar: f64) -> bool {
    let scale = e_bar.abs().max(inp.delta * inp.w_bar() / inp.lip_l()).max(1.0);
    dia_coupling_slack(inp, e_bar, q_bar) >= -1e-12 * scale
}

/// Equivalent form of [`dia_coupling_check`]:
/// `Lipf e + 2 e / delta + q <= w / (4 LipL)`.
pub fn dia_coupling_check_transformed(inp: &BoundInputs, e_bar: f64, q_bar: f64) -> bool {
    let lhs = dia_transformed_disturbance(inp, e_bar, q_bar);
    let rhs = inp.w_bar() / (4.0 * inp.lip_l());
    lhs - rhs <= 1e-12 * lhs.abs().max(rhs).max(1.0)
}

/// One row of the `bounds` report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub method: Method,
    pub delta: f64,
    pub envelope: RobustnessEnvelope,
    /// Sampling bound; shared by DiA and OBC, not available for InfC.
    pub delta_bar: Option<f64>,
    /// Aiming-radius bound (DiA only).
    pub r_bar: Option<f64>,
}

pub fn bounds_table(inp: &BoundInputs, q_bar: f64) -> Result<Vec<BoundsRow>> {
    let sampling = dia_sampling_bounds(inp)?;
    Method::ALL
        .iter()
        .map(|&method| {
            Ok(BoundsRow {
                method,
                delta: inp.delta,
                envelope: table1_envelope(method, inp, q_bar)?,
                delta_bar: (method != Method::Infc).then_some(sampling.delta_bar),
                r_bar: (method == Method::Dia).then_some(sampling.r_bar),
            })
        })
        .collect()
}
