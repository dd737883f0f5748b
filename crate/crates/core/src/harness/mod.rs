//! Convergence and performance studies.

pub mod bench;
pub mod converge;
