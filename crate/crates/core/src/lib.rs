//! Simulation laboratory for supercritical percolation and first-passage
//! percolation on Z^d.
//!
//! All randomness comes from one uniform field per replica ([`field`]); every
//! passage-time law, openness threshold and truncation is a deterministic
//! function of it, so monotone couplings hold edge by edge.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod cluster;
pub mod dist;
pub mod error;
pub mod experiment;
pub mod field;
pub mod fpp;
pub mod isoperimetry;
pub mod lattice;
pub mod renorm;
pub mod rightmost;
pub mod stats;

pub use error::{Error, Result};
