//! Two-layer networks trained by stochastic gradient methods, a-priori
//! generalization bounds for them, and the numerical machinery used to test
//! those bounds empirically.

pub mod analysis;
pub mod bounds;
pub mod data;
pub mod error;
pub mod model;
pub mod numfmt;
pub mod rng;
pub mod sgm;
pub mod transport;

pub use error::{Error, Result};
