//! Constructive machinery for calibrated Reifenberg-type rectifiability on
//! finite point samples.
//!
//! The crate is `no_std` (with `alloc`). It covers multiscale plane fitting
//! and good/bad ball classification, the Vitali radius field, a smooth
//! partition of unity, the averaged-projector subspace field with its
//! potential `Phi_r`, the approximating manifold built from fiber zeros, and
//! the recursive covering that produces a rectifiability certificate with a
//! `k`-dimensional measure upper bound.
//!
//! IO, file formats and the command line live in the companion `reif` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod calibration;
pub mod covering;
pub mod error;
pub mod exec;
pub mod field;
pub mod fixtures;
pub mod geometry;
pub mod index;
pub mod linalg;
pub mod manifold;
pub mod math;
pub mod multiscale;
pub mod partition;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use geometry::{AffinePlane, Ball, Frame, Orientation, Point, ProjectionOperator};
