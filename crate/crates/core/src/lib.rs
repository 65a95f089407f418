//! Simulation core for a pose-driven drone swarm avatar.
//!
//! Recorded upper-body landmark streams become body-scaled formation targets
//! ([`pose`]), drones are matched to targets ([`assignment`]) and flown there
//! under artificial potential fields ([`apf`], [`sim`]). A small LSTM
//! ([`lstm`]) classifies 30-frame gesture windows into five emotions that set
//! the drones' light-ring color.
//!
//! Data-parallel loops go through [`exec::Execution`]; with the `parallel`
//! feature disabled every loop runs sequentially and produces bit-identical
//! results.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apf;
pub mod assignment;
pub mod emotion;
pub mod exec;
pub mod lstm;
pub mod pose;
pub mod sim;
pub mod synthetic;

pub use emotion::{Emotion, Rgb};
pub use exec::Execution;

/// World and camera positions.
pub type Vec3 = nalgebra::Vector3<f64>;

pub(crate) fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

pub(crate) fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}
