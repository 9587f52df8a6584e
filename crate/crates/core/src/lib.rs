//! Multiobject tracking by sum-product message passing with embedded
//! invertible particle flow.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches the
//! filesystem, the clock or threads lives in the `flowtrack` companion crate.
//!
//! Module map:
//!
//! * [`flow`]: exact Daum-Huang (EDH) flow with per-step linearization and the
//!   invertible-flow mapping factor.
//! * [`models`]: constant-velocity motion, two-array TDOA sensor, clutter and
//!   birth densities.
//! * [`association`]: iterative sum-product data association.
//! * [`tracker`]: the full tracking recursion, in flow or bootstrap mode.
//! * [`metrics`]: OSPA / MOSPA and the assignment solver behind them.
//! * [`sim`]: scenario generation and measurement simulation.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod association;
mod error;
pub mod flow;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod sim;
pub mod tracker;

pub use error::{Error, Result};

/// Dimension of the kinematic state `[x, y, z, vx, vy, vz]`.
pub const STATE_DIM: usize = 6;
