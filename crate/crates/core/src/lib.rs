#![no_std]
extern crate alloc;

pub mod error;
pub mod metrics;
pub mod data;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
