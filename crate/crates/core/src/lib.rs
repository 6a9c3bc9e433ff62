//! Core library: exact parabolic spectral data, characteristic numbers,
//! weight-filtration perturbation, and log-polar grid calculus for
//! lambda-flat bundles with tame harmonic metrics.
//!
//! The crate is `no_std` (with `alloc`); all IO lives in the companion
//! CLI crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod exact;
pub mod pardata;
pub mod charnum;
pub mod ratmat;
pub mod perturb;
pub mod cmat;
pub mod speccalc;
pub mod modelflow;
pub mod corrfun;
pub mod synth;

pub use exact::{CRat, Rat};
