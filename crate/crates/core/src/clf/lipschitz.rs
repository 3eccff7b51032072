use rand::Rng;

use super::Clf;
use crate::controllers::ControlGrid;
use crate::error::{Result, StabError};
use crate::rng::{self, StreamTag};
use crate::systems::ControlledSystem;
use crate::vector::{dist, norm, norm_sq};

/// Multiplier applied to every sampled Lipschitz estimate.
pub const LIPSCHITZ_SAFETY: f64 = 1.1;

/// Relative length of the short "local" pairs.
const LOCAL_STEP: f64 = 1e-3;

/// Sampled Lipschitz constant of `L` on the closed ball of the given radius,
/// times [`LIPSCHITZ_SAFETY`].
///
/// Pair `i` is a pure function of `(seed, i)`, so raising `n_pairs` only adds
/// pairs and the estimate never decreases.
pub fn estimate_lipschitz_l<C: Clf + ?Sized>(clf: &C, radius: f64, n_pairs: usize, seed: u64) -> Result<f64> {
    estimate_lipschitz_l_with(clf, radius, n_pairs, seed, LIPSCHITZ_SAFETY)
}

pub fn estimate_lipschitz_l_with<C: Clf + ?Sized>(
    clf: &C,
    radius: f64,
    n_pairs: usize,
    seed: u64,
    safety: f64,
) -> Result<f64> {
    check_sampling_args(radius, n_pairs)?;
    let n = clf.dim();
    let h = LOCAL_STEP * radius;
    let mut best: Option<f64> = None;
    for i in 0..n_pairs {
        let mut rng = rng::stream(seed, StreamTag::LipschitzPairs, 0, i as u64);
        let x = rng::in_ball(&mut rng, n, radius);
        // Three pair families: global, short random, short along an estimated
        // steepest direction.
        let y = match i % 3 {
            0 => rng::in_ball(&mut rng, n, radius),
            1 => local_partner(&x, &rng::unit_direction(&mut rng, n), h, radius),
            _ => {
                let mut g = fd_gradient(clf, &x, h);
                if crate::vector::normalize(&mut g) == 0.0 {
                    g = rng::unit_direction(&mut rng, n);
                }
                local_partner(&x, &g, h, radius)
            }
        };
        let d = dist(&x, &y);
        if d == 0.0 {
            continue;
        }
        let lx = clf.value(&x);
        let ly = clf.value(&y);
        if !(lx.is_finite() && ly.is_finite()) {
            return Err(StabError::NumericDomain(format!("non-finite CLF value on the ball (x = {x:?})")));
        }
        let ratio = (lx - ly).abs() / d;
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    best.map(|b| b * safety).ok_or_else(|| StabError::Sampling("every sampled pair was degenerate".into()))
}

/// Sampled Lipschitz constant of `x -> f(x, u)`, uniform over the grid inputs,
/// on the ball of the given radius.
pub fn estimate_lipschitz_dynamics(
    sys: &dyn ControlledSystem,
    radius: f64,
    grid: &ControlGrid,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    check_sampling_args(radius, n_pairs)?;
    let n = sys.state_dim();
    let h = LOCAL_STEP * radius;
    let mut fx = vec![0.0; n];
    let mut fy = vec![0.0; n];
    let mut best: Option<f64> = None;
    for i in 0..n_pairs {
        let mut rng = rng::stream(seed ^ 0x5eed_f00d, StreamTag::LipschitzPairs, 1, i as u64);
        let x = rng::in_ball(&mut rng, n, radius);
        let y = if i % 2 == 0 {
            rng::in_ball(&mut rng, n, radius)
        } else {
            local_partner(&x, &rng::unit_direction(&mut rng, n), h, radius)
        };
        let d = dist(&x, &y);
        if d == 0.0 {
            continue;
        }
        let u = grid.point(rng.gen_range(0..grid.len()));
        sys.eval_into(&x, u, &mut fx);
        sys.eval_into(&y, u, &mut fy);
        let ratio = dist(&fx, &fy) / d;
        if !ratio.is_finite() {
            return Err(StabError::NumericDomain(format!("non-finite f near x = {x:?}")));
        }
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    best.map(|b| b * LIPSCHITZ_SAFETY).ok_or_else(|| StabError::Sampling("every sampled pair was degenerate".into()))
}

/// Sampled `sup ||f(x, u)||` over the ball and every grid input, times the
/// safety factor.
pub fn estimate_dynamics_bound(
    sys: &dyn ControlledSystem,
    radius: f64,
    grid: &ControlGrid,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    check_sampling_args(radius, n_samples.max(1000))?;
    let n = sys.state_dim();
    let mut f = vec![0.0; n];
    let mut best = 0.0_f64;
    for i in 0..n_samples {
        let mut rng = rng::stream(seed, StreamTag::BallSup, 7, i as u64);
        let x = if i % 2 == 0 { rng::on_sphere(&mut rng, n, radius) } else { rng::in_ball(&mut rng, n, radius) };
        for u in grid.iter() {
            sys.eval_into(&x, u, &mut f);
            let v = norm(&f);
            if !v.is_finite() {
                return Err(StabError::NumericDomain(format!("non-finite f at x = {x:?}")));
            }
            best = best.max(v);
        }
    }
    Ok(best * LIPSCHITZ_SAFETY)
}

fn check_sampling_args(radius: f64, n_pairs: usize) -> Result<()> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(StabError::Config(format!("radius must be positive, got {radius}")));
    }
    if n_pairs < 1000 {
        return Err(StabError::Config(format!("at least 1000 sample pairs required, got {n_pairs}")));
    }
    Ok(())
}

/// `x + h*dir`, or `x - h*dir` when the forward point leaves the ball.
fn local_partner(x: &[f64], dir: &[f64], h: f64, radius: f64) -> Vec<f64> {
    let fwd: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + h * d).collect();
    if norm_sq(&fwd) <= radius * radius {
        fwd
    } else {
        x.iter().zip(dir).map(|(a, d)| a - h * d).collect()
    }
}

fn fd_gradient<C: Clf + ?Sized>(clf: &C, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            probe[j] = x[j] + h;
            let up = clf.value(&probe);
            probe[j] = x[j] - h;
            let dn = clf.value(&probe);
            probe[j] = x[j];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clf::{FnClf, QuadraticClf};

    #[test]
    fn linear_function_in_one_dimension() {
        let l = FnClf::new(1, |x: &[f64]| 2.0 * x[0]);
        let lip = estimate_lipschitz_l(&l, 1.0, 1000, 3).unwrap();
        assert!((lip - 2.2).abs() < 0.01, "{lip}");
    }

    #[test]
    fn constant_function_has_zero_constant() {
        let l = FnClf::new(2, |_: &[f64]| 4.0);
        assert_eq!(estimate_lipschitz_l(&l, 1.0, 1000, 3).unwrap(), 0.0);
    }

    #[test]
    fn squared_norm_in_five_dimensions() {
        let lip = estimate_lipschitz_l(&QuadraticClf { dim: 5 }, 1.0, 3000, 11).unwrap();
        assert!((lip - 2.2).abs() < 0.01, "{lip}");
        assert!(lip <= 2.2 * (1.0 + LOCAL_STEP) + 1e-12);
    }

    #[test]
    fn rejects_too_few_pairs() {
        let l = QuadraticClf { dim: 2 };
        assert!(matches!(estimate_lipschitz_l(&l, 1.0, 10, 0), Err(StabError::Config(_))));
    }
}
