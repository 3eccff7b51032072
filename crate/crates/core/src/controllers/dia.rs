use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{ControlGrid, Controller, Method, StepSeed};
use crate::clf::Clf;
use crate::error::{Result, StabError};
use crate::rng::{self, StreamTag};
use crate::systems::ControlledSystem;
use crate::vector::{dot, normalize, ControlVec, StateVec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiaParams {
    /// Aiming radius.
    pub r: f64,
    /// Size of the deterministic low-discrepancy direction set.
    pub n_dirs: usize,
    /// Extra seeded random directions per call.
    pub n_random: usize,
    /// Rounds of tangent-perturbation refinement around the best direction.
    pub refine_rounds: usize,
}

impl Default for DiaParams {
    fn default() -> Self {
        Self { r: 0.1, n_dirs: 512, n_random: 64, refine_rounds: 8 }
    }
}

/// Minimizer of `L` over the sphere of radius `r` around a point.
///
/// The probe set is a Halton-based direction set (fixed per dimension),
/// some seeded random directions, and a shrinking tangent refinement around
/// the incumbent.
#[derive(Clone, Debug)]
pub struct DiaAimer {
    params: DiaParams,
    base: Vec<Vec<f64>>,
    n: usize,
}

impl DiaAimer {
    pub fn new(n: usize, params: DiaParams) -> Result<Self> {
        if !(params.r > 0.0 && params.r.is_finite()) {
            return Err(StabError::Config(format!("aiming radius must be positive, got {}", params.r)));
        }
        if n == 0 || params.n_dirs == 0 {
            return Err(StabError::Config("aiming needs n >= 1 and n_dirs >= 1".into()));
        }
        let base = if n == 1 { vec![vec![1.0], vec![-1.0]] } else { halton_directions(n, params.n_dirs) };
        Ok(Self { params, base, n })
    }

    pub fn params(&self) -> &DiaParams {
        &self.params
    }

    pub fn aim<C: Clf + ?Sized>(&self, clf: &C, x: &[f64], seed: u64) -> StateVec {
        self.aim_traced(clf, x, seed, &mut |_, _| {})
    }

    /// As [`aim`](Self::aim), reporting every probed boundary point and its
    /// CLF value to `trace`.
    pub fn aim_traced<C: Clf + ?Sized>(
        &self,
        clf: &C,
        x: &[f64],
        seed: u64,
        trace: &mut dyn FnMut(&[f64], f64),
    ) -> StateVec {
        let n = self.n;
        let r = self.params.r;
        let mut z = vec![0.0; n];
        let mut probe = |d: &[f64], z: &mut Vec<f64>| -> f64 {
            for i in 0..n {
                z[i] = x[i] + r * d[i];
            }
            let v = clf.value(z);
            trace(z, v);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut best_d = self.base[0].clone();
        let mut best_v = f64::INFINITY;
        for d in &self.base {
            let v = probe(d, &mut z);
            if v < best_v {
                best_v = v;
                best_d.copy_from_slice(d);
            }
        }
        for i in 0..self.params.n_random {
            let mut rng = rng::stream(seed, StreamTag::AimDirections, 0, i as u64);
            let d = rng::unit_direction(&mut rng, n);
            let v = probe(&d, &mut z);
            if v < best_v {
                best_v = v;
                best_d = d;
            }
        }

        if n > 1 {
            let mut rng = rng::stream(seed, StreamTag::AimDirections, 1, 0);
            let mut sigma = 0.5;
            let mut cand = vec![0.0; n];
            for _ in 0..self.params.refine_rounds {
                for _ in 0..2 * n {
                    let mut t = rng::unit_direction(&mut rng, n);
                    let along = dot(&t, &best_d);
                    t.iter_mut().zip(&best_d).for_each(|(ti, di)| *ti -= along * di);
                    if normalize(&mut t) < 1e-12 {
                        continue;
                    }
                    for i in 0..n {
                        cand[i] = best_d[i] + sigma * t[i];
                    }
                    normalize(&mut cand);
                    let v = probe(&cand, &mut z);
                    if v < best_v {
                        best_v = v;
                        best_d.copy_from_slice(&cand);
                    }
                }
                sigma *= 0.5;
            }
        }

        StateVec(x.iter().zip(&best_d).map(|(xi, di)| xi + r * di).collect())
    }
}

/// Boundary point of `B_r(x)` with the smallest sampled CLF value.
pub fn dia_aim_point<C: Clf + ?Sized>(clf: &C, x: &[f64], params: &DiaParams, seed: u64) -> Result<StateVec> {
    Ok(DiaAimer::new(x.len(), params.clone())?.aim(clf, x, seed))
}

/// `argmin_u <f(x, u), x - z*>` over the grid.
pub fn dia_control(sys: &dyn ControlledSystem, x_meas: &[f64], z_star: &[f64], grid: &ControlGrid) -> ControlVec {
    let aim: Vec<f64> = x_meas.iter().zip(z_star).map(|(a, b)| a - b).collect();
    let mut f = vec![0.0; x_meas.len()];
    let (i, _) = grid.argmin(|u| {
        sys.eval_into(x_meas, u, &mut f);
        dot(&f, &aim)
    });
    ControlVec::from(grid.point(i))
}

/// Dini aiming applied to the measured state.
pub struct DiaController<'a> {
    sys: &'a dyn ControlledSystem,
    clf: &'a dyn Clf,
    aimer: DiaAimer,
    grid: ControlGrid,
}

impl<'a> DiaController<'a> {
    pub fn new(sys: &'a dyn ControlledSystem, clf: &'a dyn Clf, params: DiaParams, grid: ControlGrid) -> Result<Self> {
        Ok(Self { sys, clf, aimer: DiaAimer::new(sys.state_dim(), params)?, grid })
    }
}

impl Controller for DiaController<'_> {
    fn method(&self) -> Method {
        Method::Dia
    }

    fn control(&self, x_meas: &[f64], step: StepSeed) -> Result<ControlVec> {
        let z = self.aimer.aim(self.clf, x_meas, step.derive(StreamTag::AimDirections));
        Ok(dia_control(self.sys, x_meas, &z, &self.grid))
    }
}

/// Unit directions from a Halton sequence pushed through Box-Muller.
fn halton_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let pairs = n.div_ceil(2);
    assert!(2 * pairs <= PRIMES.len(), "dimension {n} too large for the direction set");
    let mut out = Vec::with_capacity(count);
    let mut index = 1u64;
    while out.len() < count {
        let mut g = Vec::with_capacity(2 * pairs);
        for p in 0..pairs {
            let u1 = radical_inverse(index, PRIMES[2 * p]);
            let u2 = radical_inverse(index, PRIMES[2 * p + 1]);
            let rad = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (TAU * u2).sin_cos();
            g.push(rad * c);
            g.push(rad * s);
        }
        g.truncate(n);
        index += 1;
        if normalize(&mut g) > 1e-12 {
            out.push(g);
        }
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clf::QuadraticClf;
    use crate::systems::{InputBox, SingleIntegrator};
    use crate::vector::dist;

    #[test]
    fn aims_toward_origin_for_squared_norm() {
        let z = dia_aim_point(&QuadraticClf { dim: 2 }, &[1.0, 0.0], &DiaParams::default(), 1).unwrap();
        assert!((z[0] - 0.9).abs() < 1e-3 && z[1].abs() < 1e-3, "{z:?}");
        assert!((dist(&z, &[1.0, 0.0]) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn symmetric_tie_lands_on_sphere() {
        let z = dia_aim_point(&QuadraticClf { dim: 3 }, &[0.0; 3], &DiaParams::default(), 4).unwrap();
        assert!((z.norm() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn aim_is_optimal_over_its_probe_set() {
        let aimer = DiaAimer::new(4, DiaParams::default()).unwrap();
        let clf =
            crate::clf::FnClf::new(4, |x: &[f64]| x[0].abs() + 2.0 * x[1].abs() + x[2] * x[2] + (x[3] - 0.3).abs());
        let x = [0.4, -0.2, 0.1, 0.9];
        let mut min_probe = f64::INFINITY;
        let z = aimer.aim_traced(&clf, &x, 9, &mut |_, v| min_probe = min_probe.min(v));
        assert_eq!(clf.value(&z), min_probe);
    }

    #[test]
    fn one_dimensional_aim_uses_both_sides() {
        let z = dia_aim_point(&QuadraticClf { dim: 1 }, &[0.5], &DiaParams::default(), 0).unwrap();
        assert!((z[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn control_picks_box_boundary_for_linear_objective() {
        let sys = SingleIntegrator::new(InputBox::symmetric(1, 1.0));
        let grid = ControlGrid::uniform(sys.input_box(), 21).unwrap();
        // x - z* = 1
        let u = dia_control(&sys, &[1.0], &[0.0], &grid);
        assert_eq!(&*u, &[-1.0]);
    }

    #[test]
    fn zero_field_returns_first_grid_point() {
        let sys =
            crate::systems::FnSystem::new(2, InputBox::symmetric(2, 1.0), |_: &[f64], _: &[f64], out: &mut [f64]| {
                out.fill(0.0)
            });
        let grid = ControlGrid::uniform(sys.input_box(), 5).unwrap();
        assert_eq!(&*dia_control(&sys, &[1.0, 2.0], &[0.9, 2.0], &grid), grid.point(0));
    }

    #[test]
    fn direction_set_is_unit_and_spread() {
        let dirs = halton_directions(5, 512);
        assert_eq!(dirs.len(), 512);
        let mut mean = [0.0; 5];
        for d in &dirs {
            assert!((crate::vector::norm(d) - 1.0).abs() < 1e-12);
            for i in 0..5 {
                mean[i] += d[i] / 512.0;
            }
        }
        assert!(crate::vector::norm(&mean) < 0.1, "{mean:?}");
    }
}
