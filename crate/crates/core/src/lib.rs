//! Discrete-event simulation of ATM networks carrying ABR traffic under
//! explicit-rate (ERICA), binary EFCI and relative-rate feedback.
//!
//! The crate is `no_std` with `alloc`. File formats, the command line and
//! report writing live in the `abrsim` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod endsystem;
pub mod engine;
pub mod erica;
pub mod gcra;
pub mod metrics;
pub mod model;
pub mod switch;

pub use engine::scenario::Scenario;
pub use engine::{run, EngineError};
pub use metrics::RunReport;
pub use model::{Cell, Rate, Time, VcId};
