//! Spectral boundary-integral closure of the strip and the standalone
//! boundary-integral fault solver.

pub mod boundary;
pub mod fault_solver;
pub mod kernels;
pub mod spectral;
