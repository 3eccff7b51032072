use serde::{Deserialize, Serialize};

use crate::rng::{self, StreamTag};
use crate::vector::StateVec;

/// How a bounded error vector is realized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Norm exactly equal to the bound, uniformly random direction.
    #[default]
    WorstCaseSphere,
    /// Uniform by volume in the ball of the bound.
    UniformBall,
}

/// Bounded measurement errors `e` and disturbances `q`.
///
/// Draws are stateless: the vector for sampling instant `k` of run
/// `run_index` depends only on `(seed, stream, run_index, k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub e_bar: f64,
    pub q_bar: f64,
    #[serde(default)]
    pub mode: NoiseMode,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self { e_bar: 0.0, q_bar: 0.0, mode: NoiseMode::WorstCaseSphere, seed: 0 }
    }

    pub fn new(e_bar: f64, q_bar: f64, mode: NoiseMode, seed: u64) -> Self {
        Self { e_bar, q_bar, mode, seed }
    }

    /// Error on the state measured at sampling instant `k`.
    pub fn draw_measurement_error(&self, run_index: u64, k: u64, n: usize) -> StateVec {
        self.draw(self.e_bar, StreamTag::Measurement, run_index, k, n)
    }

    /// Disturbance held over sampling interval `k`.
    pub fn draw_disturbance(&self, run_index: u64, k: u64, n: usize) -> StateVec {
        self.draw(self.q_bar, StreamTag::Disturbance, run_index, k, n)
    }

    /// Disturbance for substep `j` of interval `k`, for the per-substep mode.
    pub fn draw_disturbance_substep(&self, run_index: u64, k: u64, j: u64, n: usize) -> StateVec {
        self.draw(self.q_bar, StreamTag::DisturbanceSubstep, run_index, (k << 20) | (j & 0xF_FFFF), n)
    }

    fn draw(&self, bound: f64, tag: StreamTag, run: u64, k: u64, n: usize) -> StateVec {
        if bound == 0.0 {
            return StateVec::zeros(n);
        }
        let mut rng = rng::stream(self.seed, tag, run, k);
        let v = match self.mode {
            NoiseMode::WorstCaseSphere => rng::on_sphere(&mut rng, n, bound),
            NoiseMode::UniformBall => rng::in_ball(&mut rng, n, bound),
        };
        StateVec(v)
    }
}
