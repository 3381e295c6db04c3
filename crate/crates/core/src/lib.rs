//! Hierarchical coalescence processes on the line: stationary point
//! processes, one-epoch coalescence, the multi-epoch driver, exact measure
//! recursions, universal limit laws and statistical validation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
pub mod hcp;
pub mod limits;
pub mod measure;
pub mod ocp;
pub mod rng;
pub mod spp;
pub mod stats;

pub use error::{HcpError, Result};
