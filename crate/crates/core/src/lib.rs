//! Phase-field simulation of hydrogen-assisted fatigue crack growth in
//! Compact Tension specimens.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod config;
pub mod driver;
pub mod element;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod hydrogen;
pub mod mechanics;
pub mod mesh;
pub mod model;
pub mod output;
pub mod phasefield;

pub use error::{Error, Result};
