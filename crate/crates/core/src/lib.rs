//! Simulation of memory-assisted measurement-device-independent quantum
//! secret sharing with heralded single-photon sources.
//!
//! The analytic modules are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiation. Monte Carlo and the
//! optical logic work in `f64` only.

pub mod decoy;
pub mod error;
pub mod ghz;
pub mod keyrate;
pub mod montecarlo;
pub mod num;
pub mod params;
pub mod quadrature;
pub mod sources;
pub mod sync;

pub use decoy::{GainTable, Q111Convention, SinglePhotonEstimates};
pub use error::{Error, Result};
pub use keyrate::{BaselineModel, RatePoint};
pub use num::Real;
pub use params::SimParams;
pub use sync::SyncModel;

pub type SimParams64 = SimParams<f64>;
pub type SimParams32 = SimParams<f32>;
pub type SyncModel64 = SyncModel<f64>;
pub type SyncModel32 = SyncModel<f32>;
pub type GainTable64 = GainTable<f64>;
pub type RatePoint64 = RatePoint<f64>;
