use super::{ControlGrid, Controller, Method, StepSeed};
use crate::clf::Clf;
use crate::error::{Result, StabError};
use crate::systems::ControlledSystem;
use crate::vector::ControlVec;

/// `argmin_u L(x + delta f(x, u))` over the grid (forward-Euler lookahead).
/// Returns the input and the predicted CLF value.
pub fn obc_control(
    sys: &dyn ControlledSystem,
    clf: &dyn Clf,
    x_meas: &[f64],
    delta: f64,
    grid: &ControlGrid,
) -> (ControlVec, f64) {
    let n = x_meas.len();
    let mut f = vec![0.0; n];
    let mut next = vec![0.0; n];
    let (i, v) = grid.argmin(|u| {
        sys.eval_into(x_meas, u, &mut f);
        crate::vector::axpy_into(x_meas, delta, &f, &mut next);
        clf.value(&next)
    });
    (ControlVec::from(grid.point(i)), v)
}

pub struct ObcController<'a> {
    sys: &'a dyn ControlledSystem,
    clf: &'a dyn Clf,
    delta: f64,
    grid: ControlGrid,
}

impl<'a> ObcController<'a> {
    pub fn new(sys: &'a dyn ControlledSystem, clf: &'a dyn Clf, delta: f64, grid: ControlGrid) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(StabError::Config(format!("sampling period must be positive, got {delta}")));
        }
        Ok(Self { sys, clf, delta, grid })
    }
}

impl Controller for ObcController<'_> {
    fn method(&self) -> Method {
        Method::Obc
    }

    fn control(&self, x_meas: &[f64], _step: StepSeed) -> Result<ControlVec> {
        Ok(obc_control(self.sys, self.clf, x_meas, self.delta, &self.grid).0)
    }
}
