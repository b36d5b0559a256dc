//! Constrained switched linear systems: graph-constrained families of
//! discrete-time systems, LMI certificates for stability and performance,
//! weakly-hard real-time compilation, and validation utilities.

extern crate openblas_src;

pub mod certify;
pub mod design;
pub mod error;
pub mod linalg;
pub mod lmi;
pub mod model;
pub mod pipeline;
pub mod sdp;
pub mod sim;
pub mod whrt;

pub use error::{Error, Result};
