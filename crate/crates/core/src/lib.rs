//! Force regression from synchronized RGB, depth and force streams.
//!
//! Each frame is encoded by a small convolutional RGB encoder and a
//! permutation-invariant point-cloud encoder; the concatenated per-frame
//! features of a centered window are regressed to the middle frame's z-force
//! by a stack of temporal convolutions with batch norm and ReLU.

pub mod cli;
pub mod config;
pub mod encoders;
pub mod eval;
pub mod error;
pub mod geometry;
pub mod io;
pub mod nn;
pub mod synthgen;
pub mod tcn;

pub use error::{Error, Result};
