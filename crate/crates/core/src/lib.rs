//! Numerical core for characterizing a single-photon emitter observed through
//! a confocal microscope and an optical nanofiber.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure function
//! of its inputs: photon-stream Monte Carlo generation is driven by explicit
//! seeds, and file formats, configuration and the command line live in the
//! `sivkit` companion crate.
//!
//! Units are fixed throughout: rates in kcps, intensities in MW/cm², laser
//! power in mW, wavelengths in nm, timestamps in integer picoseconds and
//! lifetimes in nanoseconds. Conversions between them are in [`units`].

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod correlator;
pub mod emitter;
pub mod error;
pub mod fiber;
pub mod fit;
pub mod photostream;
pub mod special;
pub mod synth;
pub mod units;

pub use error::{Error, Result};
