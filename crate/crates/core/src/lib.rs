//! Allocation under binding price ceilings: efficient, cost-minimizing and
//! worst-case rationing, cost-path jump detection, and sharp bounds on
//! misallocation loss over a band of demand slopes.

pub mod alloc;
pub mod bounds;
pub mod calibration;
pub mod chaos;
pub mod cli;
pub mod error;
pub mod model;

pub use error::{Error, Result};
