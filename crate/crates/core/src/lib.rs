//! Simulation and planning of quantum key distribution links that share
//! metro optical networks with classical traffic.
//!
//! The crate models CWDM ROADM backbone rings and GPON access trees, the
//! noise that classical channels inject into the quantum channel, and the
//! decoy-state BB84 key rates that result, along with the calibration and
//! sweep tooling used by the `qkd-metro` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod channel_plan;
pub mod cli;
pub mod config;
pub mod error;
pub mod keyrate;
pub mod network;
pub mod noise;
pub mod optical_path;
pub mod optim;
pub mod svg;
pub mod sweep;

pub use error::{Error, Result};
