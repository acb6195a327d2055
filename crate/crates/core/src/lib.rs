//! Random ±1 matrices with fixed row sums: samplers, spectral tools,
//! log-determinant and least-singular-value machinery, small-ball
//! (Littlewood–Offord) oracles, distance concentration experiments, and the
//! experiment runner behind the `circlaw` command-line tool.

pub mod anticoncentration;
pub mod concentration;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod linalg;
pub mod logdet;
pub mod polynomial;
pub mod rng;
pub mod sampler;
pub mod singular;
pub mod spectral;

pub use error::{Error, Result};
