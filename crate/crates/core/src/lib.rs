//! Simulation of a solar-powered WiFi access point that charges RF-energy
//! harvesting IoT devices while serving legacy data users, plus the transmit
//! power controllers evaluated on it.

// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod config;
pub mod env;
pub mod error;
pub mod gpr;
pub mod harness;
pub mod mpc;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
