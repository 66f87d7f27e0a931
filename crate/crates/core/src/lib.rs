//! Optimal dividend ratcheting with capital injection in the Cramér–Lundberg
//! model: the value function on a rate ladder, its free boundary, and Monte
//! Carlo checks of the resulting feedback strategy.

pub mod boundary;
pub mod cache;
pub mod cli;
pub mod config;
pub mod discretization;
pub mod error;
pub mod ladder;
pub mod model;
pub mod simulate;
pub mod surface;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
