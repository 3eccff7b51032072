//! Counter-based random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream whose
//! 256-bit key is the tuple (master seed, stream tag, run index, counter).
//! A draw therefore depends only on its coordinates, never on how many other
//! draws happened before it or on which worker thread asked for it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream tags. Distinct tags give statistically independent streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamTag {
    Measurement = 1,
    Disturbance = 2,
    InitialState = 3,
    AimDirections = 4,
    ProxStarts = 5,
    LipschitzPairs = 6,
    EnvelopeShells = 7,
    BallSup = 8,
    DecayStates = 9,
    Fuzz = 10,
    DisturbanceSubstep = 11,
}

pub fn stream(seed: u64, tag: StreamTag, run: u64, counter: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(tag as u64).to_le_bytes());
    key[16..24].copy_from_slice(&run.to_le_bytes());
    key[24..32].copy_from_slice(&counter.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Uniform direction on the unit sphere of R^n (normalized Gaussian).
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if crate::vector::normalize(&mut v) > 1e-300 {
            return v;
        }
    }
}

/// Point on the sphere of the given radius.
pub fn on_sphere<R: Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> Vec<f64> {
    let mut v = unit_direction(rng, n);
    v.iter_mut().for_each(|x| *x *= radius);
    v
}

/// Point uniformly distributed (by volume) in the closed ball.
pub fn in_ball<R: Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> Vec<f64> {
    let u: f64 = rng.gen();
    let r = radius * u.powf(1.0 / n as f64);
    on_sphere(rng, n, r)
}
