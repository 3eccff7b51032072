//! Robust sample-and-hold stabilization with nonsmooth control-Lyapunov
//! functions: estimators for the CLF regularity constants, benchmark plants,
//! three feedback laws, a sampled-data simulator, the analytic robustness
//! bounds and the experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod bounds;
pub mod clf;
pub mod controllers;
pub mod error;
pub mod rng;
pub mod sim;
pub mod systems;
pub mod vector;

pub use error::{Result, StabError};
pub use vector::{ControlVec, StateVec};
