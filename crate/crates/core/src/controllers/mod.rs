//! Sample-and-hold feedback laws built on a CLF: Dini aiming,
//! optimization-based (one-step Euler lookahead) control, and
//! inf-convolution control via proximal subgradients.

mod dia;
mod grid;
mod infc;
mod obc;
mod pattern;

pub use dia::{dia_aim_point, dia_control, DiaAimer, DiaController, DiaParams};
pub use grid::ControlGrid;
pub use infc::{infc_control, infc_prox, InfcController, InfcParams, ProxResult};
pub use obc::{obc_control, ObcController};
pub use pattern::{compass_search, PatternSearchResult};

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::clf::Clf;
use crate::error::{Result, StabError};
use crate::rng::{self, StreamTag};
use crate::systems::ControlledSystem;
use crate::vector::ControlVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dia,
    Obc,
    Infc,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Dia, Method::Obc, Method::Infc];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dia => "dia",
            Method::Obc => "obc",
            Method::Infc => "infc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = StabError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dia" => Ok(Method::Dia),
            "obc" => Ok(Method::Obc),
            "infc" => Ok(Method::Infc),
            other => Err(StabError::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Coordinates of one controller call inside a batch of runs. Any
/// randomness a controller uses is derived from these.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepSeed {
    pub seed: u64,
    pub run_index: u64,
    pub k: u64,
}

impl StepSeed {
    pub fn new(seed: u64, run_index: u64, k: u64) -> Self {
        Self { seed, run_index, k }
    }

    pub(crate) fn derive(&self, tag: StreamTag) -> u64 {
        rng::stream(self.seed, tag, self.run_index, self.k).next_u64()
    }
}

/// A state feedback evaluated on the measured state and held over one
/// sampling interval.
pub trait Controller: Send + Sync {
    fn method(&self) -> Method;
    fn control(&self, x_meas: &[f64], step: StepSeed) -> Result<ControlVec>;
}

/// Method tag plus every method's parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilizerConfig {
    pub method: Method,
    pub dia: DiaParams,
    pub infc: InfcParams,
    pub points_per_axis: usize,
}

impl Default for StabilizerConfig {
    fn default() -> Self {
        Self { method: Method::Obc, dia: DiaParams::default(), infc: InfcParams::default(), points_per_axis: 21 }
    }
}

impl StabilizerConfig {
    pub fn with_method(method: Method) -> Self {
        Self { method, ..Default::default() }
    }

    /// Instantiate the configured controller. `delta` is the sampling
    /// period, used by the Euler lookahead of OBC.
    pub fn build<'a>(
        &self,
        sys: &'a dyn ControlledSystem,
        clf: &'a dyn Clf,
        delta: f64,
    ) -> Result<Box<dyn Controller + 'a>> {
        let grid = ControlGrid::uniform(sys.input_box(), self.points_per_axis)?;
        Ok(match self.method {
            Method::Dia => Box::new(DiaController::new(sys, clf, self.dia.clone(), grid)?),
            Method::Obc => Box::new(ObcController::new(sys, clf, delta, grid)?),
            Method::Infc => Box::new(InfcController::new(sys, clf, self.infc.clone(), grid)?),
        })
    }
}
