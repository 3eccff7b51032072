use serde::{Deserialize, Serialize};

use crate::error::{Result, StabError};
use crate::systems::InputBox;

/// Tensor grid over the input box, enumerated with the first channel
/// varying slowest. All argmins over U scan this grid and keep the lowest
/// index on ties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlGrid {
    m: usize,
    counts: Vec<usize>,
    points: Vec<f64>,
}

impl ControlGrid {
    pub fn new(input_box: &InputBox, counts: &[usize]) -> Result<Self> {
        let m = input_box.dim();
        if counts.len() != m {
            return Err(StabError::Config(format!("grid has {} axes but the input box has {m}", counts.len())));
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(StabError::Config("control grid needs at least 2 points per axis".into()));
        }
        let axes: Vec<Vec<f64>> = input_box
            .channels()
            .iter()
            .zip(counts)
            .map(|(&(lo, hi), &c)| {
                (0..c).map(|i| if i + 1 == c { hi } else { lo + (hi - lo) * i as f64 / (c - 1) as f64 }).collect()
            })
            .collect();
        let total: usize = counts.iter().product();
        let mut points = Vec::with_capacity(total * m);
        let mut idx = vec![0usize; m];
        for _ in 0..total {
            points.extend(idx.iter().enumerate().map(|(a, &i)| axes[a][i]));
            for a in (0..m).rev() {
                idx[a] += 1;
                if idx[a] < counts[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(Self { m, counts: counts.to_vec(), points })
    }

    pub fn uniform(input_box: &InputBox, per_axis: usize) -> Result<Self> {
        Self::new(input_box, &vec![per_axis; input_box.dim()])
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.m..(i + 1) * self.m]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.m)
    }

    /// Index and value of the smallest objective; first index wins ties and
    /// NaN never wins.
    pub fn argmin<F: FnMut(&[f64]) -> f64>(&self, mut objective: F) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, u) in self.iter().enumerate() {
            let v = objective(u);
            if v < best.1 {
                best = (i, v);
            }
        }
        if best.1 == f64::INFINITY {
            // Every value was +inf or NaN.
            best.0 = 0;
        }
        best
    }
}
