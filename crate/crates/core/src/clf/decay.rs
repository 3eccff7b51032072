use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ldgd_with_buffer, BallRadii, Clf, MuGrid};
use crate::controllers::ControlGrid;
use crate::error::{Result, StabError};
use crate::rng::{self, StreamTag};
use crate::systems::ControlledSystem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    pub n_states: usize,
    pub seed: u64,
    pub mu_grid: MuGrid,
    /// Share of the states placed exactly on the inner sphere of the
    /// annulus, where the decay rate is typically smallest.
    pub inner_fraction: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self { n_states: 2000, seed: 0, mu_grid: MuGrid::default(), inner_fraction: 0.25 }
    }
}

/// Sampled minimum decay rate over the annulus `s_star/2 <= |x| <= S_star`:
/// `min_x max_u -D_{f(x,u)} L(x)` with `u` ranging over the control grid.
pub fn estimate_min_decay<C: Clf + ?Sized>(
    clf: &C,
    sys: &dyn ControlledSystem,
    radii: &BallRadii,
    grid: &ControlGrid,
    opts: &DecayOptions,
) -> Result<f64> {
    let inner = 0.5 * radii.s_star;
    let outer = radii.big_s_star;
    if !(inner > 0.0 && inner <= outer) || opts.n_states == 0 {
        return Err(StabError::Config(format!("empty decay annulus [{inner}, {outer}] or no states requested")));
    }
    let n = sys.state_dim();
    let n_inner = ((opts.n_states as f64) * opts.inner_fraction).round() as usize;

    let rates: Vec<Result<(f64, Vec<f64>)>> = (0..opts.n_states)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(opts.seed, StreamTag::DecayStates, 0, i as u64);
            let r = if i < n_inner { inner } else { rng.gen_range(inner..=outer) };
            let x = rng::on_sphere(&mut rng, n, r);
            let w = decay_rate(clf, sys, &x, grid, &opts.mu_grid)?;
            Ok((w, x))
        })
        .collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in rates {
        let (w, x) = r?;
        if best.as_ref().is_none_or(|(b, _)| w < *b) {
            best = Some((w, x));
        }
    }
    let (w_bar, witness) = best.expect("n_states > 0");
    if w_bar <= 0.0 {
        return Err(StabError::DecayViolation { witness, value: w_bar });
    }
    Ok(w_bar)
}

/// `max_u -D_{f(x,u)} L(x)` over the grid.
pub(crate) fn decay_rate<C: Clf + ?Sized>(
    clf: &C,
    sys: &dyn ControlledSystem,
    x: &[f64],
    grid: &ControlGrid,
    mu_grid: &MuGrid,
) -> Result<f64> {
    let n = x.len();
    let lx = clf.value(x);
    let mut f = vec![0.0; n];
    let mut probe = vec![0.0; n];
    let mut best = f64::NEG_INFINITY;
    for u in grid.iter() {
        sys.eval_into(x, u, &mut f);
        let d = ldgd_with_buffer(clf, x, lx, &f, mu_grid, &mut probe)?;
        best = best.max(-d);
    }
    Ok(best)
}
