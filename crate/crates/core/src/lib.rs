//! Hybrid finite-element / spectral boundary integral solver for 3D dynamic
//! rupture on planar faults.
//!
//! A thin strip of explicit finite elements holds the faults and any
//! heterogeneous material. Its two outer planes are closed by exact
//! boundary-integral representations of the elastic half-spaces beyond, so
//! waves leave the strip without reflection.
//!
//! ```no_run
//! use fesbi::{run_scenario, scenario};
//!
//! let s = scenario::tpv3(500.0, 2000.0)?;
//! let histories = run_scenario(&s)?;
//! println!("{} nodes ruptured", histories[0].rupture.ruptured_count());
//! # Ok::<(), fesbi::Error>(())
//! ```

pub mod config;
pub mod coupler;
pub mod error;
pub mod fault;
pub mod fem;
pub mod harness;
pub mod material;
pub mod mesh;
pub mod output;
pub mod record;
pub mod run;
pub mod sbi;
pub mod scenario;

pub use config::{OutputSettings, PresetSelection, RunConfig};
pub use coupler::{hybrid_step, HybridSolver, StepPhase, StepReport};
pub use error::{Error, Result};
pub use fault::{FaultSpec, SlipWeakening};
pub use material::{ElasticMaterial, MaterialSpec};
pub use output::{configure_threads, execute, RunOutcome};
pub use record::{FaultHistories, RuptureMap, Station, StationSeries};
pub use run::{run_scenario, Simulation};
pub use sbi::fault_solver::sbim_fault_solver;
pub use scenario::{Scenario, TimeStepPolicy};
