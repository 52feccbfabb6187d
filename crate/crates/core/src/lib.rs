//! Statistical QoS analysis for finite-blocklength HARQ-IR satellite-terrestrial
//! downlinks: closed-form peak-AoI, delay, decoding-error and error-rate
//! exponent bounds, plus Monte Carlo oracles that check them.

// NaN-rejecting guards are written as negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod fbc;
pub mod gallager;
pub mod harq;
pub mod interference;
pub mod quad;
pub mod scenario;
pub mod simkit;
pub mod snc;
pub mod specfun;
pub mod sweep;

pub use error::{Error, Result};
