//! Neural networks built as discretised dynamical systems, with stability
//! guarantees enforced while training.

pub mod attacks;
pub mod blocks;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod invprob;
pub mod manifest;
pub mod numkit;
pub mod ode;
pub mod rng;
pub mod stability;
pub mod train;

pub use error::{Error, Result};
pub use numkit::{Matrix, Vector};
