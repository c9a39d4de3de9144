//! Controlled growth model of an even-aged, single-species forest stand.
//!
//! The stand is summarized by the basal area per tree and the tree count.
//! Growth is limited by a self-thinning density constraint and driven by a
//! thinning control. The crate provides the dynamics, the canonical thinning
//! strategies and their characteristic times, analytical envelope bounds,
//! the discounted revenue objective and a brute-force policy search.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`, the usual choice.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod economics;
pub mod error;
pub mod export;
pub mod model;
pub mod numerics;
pub mod optimizer;
pub mod scalar;
pub mod trajectories;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type StandParams64 = model::StandParams<f64>;
pub type StandState64 = model::StandState<f64>;
pub type GrowthFunction64 = model::GrowthFunction<f64>;
pub type Environment64 = model::Environment<f64>;
pub type Scenario64 = model::Scenario<f64>;
pub type Policy64 = dynamics::Policy<f64>;
pub type Trajectory64 = dynamics::Trajectory<f64>;

pub type Scenario32 = model::Scenario<f32>;
pub type Trajectory32 = dynamics::Trajectory<f32>;
