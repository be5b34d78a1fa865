//! Lossy checkpoint-restart for particle-in-cell simulations.
//!
//! Particles are compressed per cell into Gaussian mixtures of their velocity
//! distribution ([`em`]), written to a compact binary checkpoint
//! ([`checkpoint`]), and reconstructed by resampling with exact charge,
//! momentum and energy conservation ([`codec`], [`gauss`]). The [`pic`]
//! module is a 1D-1V electrostatic implicit PIC code used to exercise the
//! whole pipeline on the two-stream instability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod checkpoint;
pub mod codec;
pub mod dump;
pub mod em;
pub mod error;
pub mod gauss;
pub mod grid;
pub mod linalg;
pub mod mixture;
pub mod particle;
pub mod pipeline;
pub mod pic;

pub use error::{Error, Result};
pub use grid::Grid;
pub use particle::Particle;
