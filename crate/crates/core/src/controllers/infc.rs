use serde::{Deserialize, Serialize};

use super::{compass_search, ControlGrid, Controller, Method, StepSeed};
use crate::clf::Clf;
use crate::error::{Result, StabError};
use crate::rng::{self, StreamTag};
use crate::systems::ControlledSystem;
use crate::vector::{dot, norm_sq, ControlVec, StateVec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InfcParams {
    /// Regularization parameter in (0, 1).
    pub alpha: f64,
    pub prox_max_iters: usize,
    pub prox_tol: f64,
    /// Number of pattern-search starts, the first always at `x`.
    pub multistart: usize,
}

impl Default for InfcParams {
    fn default() -> Self {
        Self { alpha: 0.1, prox_max_iters: 20_000, prox_tol: 1e-9, multistart: 3 }
    }
}

/// Approximate minimizer of `L(y) + |y - x|^2 / (2 alpha^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProxResult {
    pub y_alpha: StateVec,
    /// Proximal subgradient `(x - y_alpha) / alpha^2`.
    pub zeta_alpha: StateVec,
    /// `L(y_alpha) + |y_alpha - x|^2 / (2 alpha^2)`.
    pub l_alpha: f64,
    /// False when some start hit the iteration cap.
    pub converged: bool,
    pub evaluations: usize,
}

/// Proximal point of `L` at `x` by multistart compass search.
///
/// Any minimizer satisfies `|y - x| <= alpha sqrt(2 L(x))` because `y = x`
/// is feasible, so extra starts are drawn in that ball.
pub fn infc_prox<C: Clf + ?Sized>(clf: &C, x: &[f64], p: &InfcParams, seed: u64) -> Result<ProxResult> {
    if !(p.alpha > 0.0 && p.alpha < 1.0) {
        return Err(StabError::Config(format!("alpha must lie in (0, 1), got {}", p.alpha)));
    }
    if !(p.prox_tol > 0.0) || p.multistart == 0 {
        return Err(StabError::Config("prox needs a positive tolerance and at least one start".into()));
    }
    let n = x.len();
    let inv = 1.0 / (2.0 * p.alpha * p.alpha);
    let objective = |y: &[f64]| {
        let d2: f64 = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        clf.value(y) + d2 * inv
    };
    let lx = clf.value(x);
    if !lx.is_finite() {
        return Err(StabError::NumericDomain(format!("L(x) = {lx}")));
    }
    let radius = p.alpha * (2.0 * lx.max(0.0)).sqrt();
    let step0 = (0.5 * radius).max(16.0 * p.prox_tol);

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut converged = true;
    let mut evaluations = 0;
    for start in 0..p.multistart {
        let y0 = if start == 0 {
            x.to_vec()
        } else {
            let mut rng = rng::stream(seed, StreamTag::ProxStarts, 0, start as u64);
            let off = rng::in_ball(&mut rng, n, radius);
            x.iter().zip(&off).map(|(a, b)| a + b).collect()
        };
        let r = compass_search(&objective, &y0, step0, p.prox_tol, p.prox_max_iters);
        converged &= r.converged;
        evaluations += r.evaluations;
        if best.as_ref().is_none_or(|(_, v)| r.value < *v) {
            best = Some((r.x, r.value));
        }
    }
    let (y, _) = best.expect("multistart >= 1");
    let a2 = p.alpha * p.alpha;
    let zeta: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (a - b) / a2).collect();
    let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let l_alpha = clf.value(&y) + norm_sq(&diff) * inv;
    Ok(ProxResult { y_alpha: StateVec(y), zeta_alpha: StateVec(zeta), l_alpha, converged, evaluations })
}

/// `argmin_u <zeta_alpha, f(y_alpha, u)>` over the grid.
pub fn infc_control(sys: &dyn ControlledSystem, prox: &ProxResult, grid: &ControlGrid) -> ControlVec {
    let mut f = vec![0.0; prox.y_alpha.len()];
    let (i, _) = grid.argmin(|u| {
        sys.eval_into(&prox.y_alpha, u, &mut f);
        dot(&prox.zeta_alpha, &f)
    });
    ControlVec::from(grid.point(i))
}

pub struct InfcController<'a> {
    sys: &'a dyn ControlledSystem,
    clf: &'a dyn Clf,
    params: InfcParams,
    grid: ControlGrid,
}

impl<'a> InfcController<'a> {
    pub fn new(sys: &'a dyn ControlledSystem, clf: &'a dyn Clf, params: InfcParams, grid: ControlGrid) -> Result<Self> {
        if !(params.alpha > 0.0 && params.alpha < 1.0) {
            return Err(StabError::Config(format!("alpha must lie in (0, 1), got {}", params.alpha)));
        }
        Ok(Self { sys, clf, params, grid })
    }
}

impl Controller for InfcController<'_> {
    fn method(&self) -> Method {
        Method::Infc
    }

    fn control(&self, x_meas: &[f64], step: StepSeed) -> Result<ControlVec> {
        let prox = infc_prox(self.clf, x_meas, &self.params, step.derive(StreamTag::ProxStarts))?;
        Ok(infc_control(self.sys, &prox, &self.grid))
    }
}
