pub mod covariance;
pub mod data;
pub mod error;
pub mod gibbs;
pub mod linalg;
pub mod mesh;
pub mod mgp;
pub mod predict;
pub mod rng;
pub mod synth;
pub mod tessellation;

pub use error::{Error, Result};
