//! Finite-element part of the solver: element matrices, the periodic strip
//! discretisation and explicit time stepping.

pub mod element;
pub mod integrator;
pub mod model;

pub use integrator::{
    accelerations_in_place, cfl_timestep, correct, correct_velocity, correct_with_force, kinetic_energy, predict, Dirichlet, SimulationState,
    BLOWUP_VELOCITY, DEFAULT_CFL_SAFETY,
};
pub use model::{assemble_lumped_mass, DofLayout, FeModel, Lateral, LumpedMass, StiffnessOperator};
