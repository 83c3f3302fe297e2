//! Echo state networks with generalized polynomial readouts.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! pieces: dense linear algebra and a seeded generator ([`numerics`]), target
//! flows and trajectories ([`dynamics`]), the reservoir itself
//! ([`reservoir`]), linear/quadratic/cubic readouts and the closed-loop map
//! ([`readout`]) and the evaluation quantities ([`metrics`]).
//!
//! File formats, experiment orchestration and the command line live in the
//! companion `polyres` crate.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod dynamics;
mod error;
pub mod metrics;
pub mod numerics;
pub mod readout;
pub mod reservoir;

pub use crate::dynamics::{FlowMap, Lorenz, Rossler, Trajectory, VectorField};
pub use crate::error::{Error, Result};
pub use crate::metrics::{Histogram, RunMetrics};
pub use crate::numerics::{Matrix, Rng};
pub use crate::readout::{AutonomousEsn, ClosedLoopModel, PolyDegree, PolyReadout};
pub use crate::reservoir::{Esn, EsnConfig};
