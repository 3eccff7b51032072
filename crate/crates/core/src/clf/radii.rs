use serde::{Deserialize, Serialize};

use super::{Clf, KInftyEnvelope};
use crate::error::{Result, StabError};
use crate::rng::{self, StreamTag};

/// Nested radii of the practical-stability argument: core ball `s_star`,
/// target ball `s`, starting ball `big_s`, overshoot ball `big_s_star`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallRadii {
    pub s: f64,
    pub s_hat: f64,
    pub ell_hat: f64,
    pub s_star: f64,
    pub big_s: f64,
    pub big_s_star: f64,
    /// Sampled sup of L on the starting ball.
    pub l_hat: f64,
    /// Sampled sup of L on the overshoot ball.
    pub l_hat_star: f64,
    pub e_hat: f64,
    pub q_hat: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiiOptions {
    /// A-priori noise bounds as a fraction of `s`.
    pub apriori_fraction: f64,
    pub sup_samples: usize,
    pub seed: u64,
}

impl Default for RadiiOptions {
    fn default() -> Self {
        Self { apriori_fraction: 0.125, sup_samples: 4000, seed: 0 }
    }
}

pub fn compute_ball_radii<C: Clf + ?Sized>(
    env: &KInftyEnvelope,
    clf: &C,
    s: f64,
    big_s: f64,
    opts: &RadiiOptions,
) -> Result<BallRadii> {
    if !(s > 0.0 && s < big_s && big_s.is_finite()) {
        return Err(StabError::Config(format!("need 0 < s < S, got s={s}, S={big_s}")));
    }
    let e_hat = opts.apriori_fraction * s;
    let q_hat = e_hat;
    let s_hat = s - e_hat - q_hat;
    if !(s_hat > 0.0) {
        return Err(StabError::Config(format!("a-priori noise bounds exceed target ball (s_hat = {s_hat})")));
    }
    let ell_hat = env.alpha1(s_hat);
    let s_star = env.alpha2_inv(ell_hat / 4.0);
    let l_hat = sampled_sup(clf, big_s, opts.sup_samples, opts.seed, 0)?;
    // alpha1(S) <= L on the sphere of radius S, so S* >= S; sampling can only
    // underestimate the sup, hence the clamp.
    let big_s_star = env.alpha1_inv(l_hat).max(big_s);
    let l_hat_star = sampled_sup(clf, big_s_star, opts.sup_samples, opts.seed, 1)?.max(l_hat);
    Ok(BallRadii { s, s_hat, ell_hat, s_star, big_s, big_s_star, l_hat, l_hat_star, e_hat, q_hat })
}

/// Sampled `sup_{|x| <= radius} L(x)`: half the points on the sphere, half in
/// the ball.
fn sampled_sup<C: Clf + ?Sized>(clf: &C, radius: f64, n_samples: usize, seed: u64, which: u64) -> Result<f64> {
    if n_samples == 0 {
        return Err(StabError::Config("sup estimate needs samples".into()));
    }
    let n = clf.dim();
    let mut rng = rng::stream(seed, StreamTag::BallSup, which, 0);
    let mut best = f64::NEG_INFINITY;
    for i in 0..n_samples {
        let x = if i % 2 == 0 { rng::on_sphere(&mut rng, n, radius) } else { rng::in_ball(&mut rng, n, radius) };
        let v = clf.value(&x);
        if !v.is_finite() {
            return Err(StabError::NumericDomain(format!("L not finite at {x:?}")));
        }
        best = best.max(v);
    }
    Ok(best)
}
