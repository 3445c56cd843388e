//! Simulation and verification toolkit for hidden-set size estimators.
//!
//! Layers, bottom up: random streams and samplers ([`rng`],
//! [`distributions`]), population mechanisms ([`model`]), estimators
//! ([`estimators`]), asymptotic regimes ([`regime`]), the replication engine
//! ([`engine`]), exact small-instance oracles ([`oracle`]) and experiment
//! configuration and reporting ([`config`], [`report`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod distributions;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod model;
pub mod oracle;
pub mod regime;
pub mod report;
pub mod rng;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
