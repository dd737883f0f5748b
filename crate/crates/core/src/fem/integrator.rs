//! Explicit predictor-corrector central-difference time stepping.
//!
//! One step from `t` to `t + dt`:
//!
//! ```text
//! v_pred  = v_t + dt a_t
//! u_{t+1} = u_t + dt v_t + dt^2 a_t / 2
//! a_{t+1} = M^-1 (f - K u_{t+1} + B tau)
//! v_{t+1} = v_pred + dt (a_{t+1} - a_t) / 2
//! ```
//!
//! which is the velocity-Verlet form of the central-difference method.

use super::model::{LumpedMass, StiffnessOperator};
use crate::error::{Error, Result};
use crate::material::ElasticMaterial;

/// Velocity above which a run is declared unstable.
pub const BLOWUP_VELOCITY: f64 = 1.0e6;

/// Default fraction of the stability limit `dx / cp` used for the time step.
pub const DEFAULT_CFL_SAFETY: f64 = 0.4;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub v_pred: Vec<f64>,
    pub step: u64,
    pub time: f64,
    pub dt: f64,
}

impl SimulationState {
    pub fn new(dofs: usize, dt: f64) -> Self {
        Self {
            u: vec![0.0; dofs],
            v: vec![0.0; dofs],
            a: vec![0.0; dofs],
            v_pred: vec![0.0; dofs],
            step: 0,
            time: 0.0,
            dt,
        }
    }

    pub fn max_velocity(&self) -> f64 {
        self.v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Fails with [`Error::Unstable`] when a velocity exceeds `limit` or is
    /// not finite.
    pub fn check_stability(&self, limit: f64) -> Result<()> {
        let vmax = self
            .v
            .iter()
            .fold(0.0_f64, |m, x| if x.is_finite() { m.max(x.abs()) } else { f64::INFINITY });
        if vmax > limit {
            return Err(Error::Unstable {
                step: self.step,
                time: self.time,
                max_velocity: vmax,
            });
        }
        Ok(())
    }
}

/// Prescribed zero-motion degrees of freedom.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dirichlet {
    dofs: Vec<usize>,
}

impl Dirichlet {
    pub fn new(mut dofs: Vec<usize>) -> Self {
        dofs.sort_unstable();
        dofs.dedup();
        Self { dofs }
    }

    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    fn apply(&self, x: &mut [f64]) {
        for &d in &self.dofs {
            x[d] = 0.0;
        }
    }
}

/// Predictor half of a step: sets `v_pred` and advances `u`.
pub fn predict(state: &mut SimulationState, fixed: &Dirichlet) {
    let dt = state.dt;
    let half_dt2 = 0.5 * dt * dt;
    for (((u, v), a), vp) in state.u.iter_mut().zip(&state.v).zip(&state.a).zip(state.v_pred.iter_mut()) {
        *vp = v + dt * a;
        *u += dt * v + half_dt2 * a;
    }
    fixed.apply(&mut state.u);
    fixed.apply(&mut state.v_pred);
}

/// Turns the total nodal force into accelerations in place.
pub fn accelerations_in_place(force: &mut [f64], mass: &LumpedMass, fixed: &Dirichlet) {
    for (f, inv_m) in force.chunks_exact_mut(3).zip(mass.inverse()) {
        for x in f {
            *x *= inv_m;
        }
    }
    fixed.apply(force);
}

/// Velocity correction with the new accelerations; advances time.
pub fn correct_velocity(state: &mut SimulationState, a_new: &[f64], fixed: &Dirichlet) {
    let half_dt = 0.5 * state.dt;
    for ((v, a), (vp, an)) in state.v.iter_mut().zip(state.a.iter_mut()).zip(state.v_pred.iter().zip(a_new)) {
        *v = vp + half_dt * (an - *a);
        *a = *an;
    }
    fixed.apply(&mut state.v);
    state.step += 1;
    state.time = state.step as f64 * state.dt;
}

/// Corrector half of a step given the total nodal force
/// `r = f - K u_{t+1} + B tau`; advances time.
pub fn correct_with_force(state: &mut SimulationState, force: &[f64], mass: &LumpedMass, fixed: &Dirichlet) {
    let mut a_new = force.to_vec();
    accelerations_in_place(&mut a_new, mass, fixed);
    correct_velocity(state, &a_new, fixed);
}

/// Corrector computing `K u_{t+1}` itself; `external` holds `f + B tau`.
pub fn correct(
    state: &mut SimulationState,
    external: &[f64],
    stiffness: &StiffnessOperator,
    mass: &LumpedMass,
    fixed: &Dirichlet,
) {
    let mut force = vec![0.0; state.u.len()];
    stiffness.apply(&state.u, &mut force);
    for (f, e) in force.iter_mut().zip(external) {
        *f = e - *f;
    }
    correct_with_force(state, &force, mass, fixed);
}

/// Stable time step `safety * dx / max(cp)`.
pub fn cfl_timestep(dx: f64, materials: &[ElasticMaterial], safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::TimeStep(format!("CFL safety factor {safety} outside (0, 1]")));
    }
    let cp = materials
        .iter()
        .map(ElasticMaterial::cp)
        .fold(0.0_f64, f64::max);
    if cp <= 0.0 || !(dx > 0.0) {
        return Err(Error::TimeStep("need a positive dx and at least one material".into()));
    }
    Ok(safety * dx / cp)
}

/// Kinetic energy `v^T M v / 2`.
pub fn kinetic_energy(v: &[f64], mass: &LumpedMass) -> f64 {
    v.chunks_exact(3)
        .zip(mass.node_mass())
        .map(|(v, m)| 0.5 * m * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))
        .sum()
}
