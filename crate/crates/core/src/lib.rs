//! Simulation, estimation and testing of price jumps around scheduled news.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cross_event;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod market_data;
pub mod mc;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
