//! Solvers for families of scalar optimal control problems over a range of
//! initial conditions.
//!
//! Two indirect neural methods — a time/initial-condition sigmoid network and
//! an initial-condition network with a Fourier output layer — train by
//! minimizing squared Pontryagin residuals over a grid of times and initial
//! conditions. A direct Fourier baseline prices the dynamics into the cost
//! instead. Closed-form and shooting oracles supply reference solutions for
//! the error metrics, and an experiment registry reproduces the benchmark
//! table end to end.

pub mod diff;
pub mod error;
pub mod method1;
pub mod method2;
pub mod oracle;
pub mod persist;
pub mod pmploss;
pub mod problems;
pub mod scalar;
pub mod train;

pub use error::{Error, Result};
