//! One time step of the hybrid method: explicit FE strip, friction on the
//! faults inside it and boundary-integral closures on its outer planes.
//!
//! A step runs the phases of [`StepPhase`] in declaration order. Boundary
//! tractions are Neumann loads `f = A tau` on the bound FE nodes, where `A` is
//! the nodal tributary area.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fault::FaultSurface;
use crate::fem::{accelerations_in_place, correct_velocity, predict, Dirichlet, DofLayout, FeModel, Lateral, SimulationState, BLOWUP_VELOCITY};
use crate::sbi::boundary::{SbiBoundary, Side};

/// Phases of a hybrid step, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepPhase {
    /// Displacement update and velocity prediction.
    Predict,
    /// Copy of `u_{t+1}` and the predicted velocity to the boundaries.
    Exchange,
    /// Boundary-integral traction from the displacement history.
    SbiTraction,
    /// Boundary tractions turned into nodal forces.
    NeumannForce,
    /// Friction resolution on every fault.
    FaultTraction,
    /// New acceleration from the total nodal force.
    Acceleration,
    /// Velocity correction and time advance.
    VelocityCorrection,
}

impl StepPhase {
    pub const ORDER: [StepPhase; 7] = [
        StepPhase::Predict,
        StepPhase::Exchange,
        StepPhase::SbiTraction,
        StepPhase::NeumannForce,
        StepPhase::FaultTraction,
        StepPhase::Acceleration,
        StepPhase::VelocityCorrection,
    ];
}

/// Map from the boundary grid to FE nodes on one plane of the strip.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplerBinding {
    side: Side,
    /// FE node of each boundary grid point, in `[k][i]` order.
    nodes: Vec<usize>,
    area: f64,
    dx: f64,
}

impl CouplerBinding {
    /// Matches FE nodes to an `n1 x n3` boundary grid with spacing `dx` and
    /// first point `origin = [x1, x3]` by their coordinates.
    pub fn by_coordinates(
        side: Side,
        nodes: &[usize],
        coords: &[[f64; 3]],
        n1: usize,
        n3: usize,
        dx: f64,
        origin: [f64; 2],
    ) -> Result<Self> {
        if nodes.len() != coords.len() {
            return Err(Error::SizeMismatch {
                expected: nodes.len(),
                got: coords.len(),
            });
        }
        if nodes.len() != n1 * n3 {
            return Err(Error::Coupling(format!(
                "boundary grid has {} points but {} FE nodes were given",
                n1 * n3,
                nodes.len()
            )));
        }
        let x2 = coords.first().map_or(0.0, |c| c[1]);
        let snap = |x: f64, n: usize| -> Option<usize> {
            let r = x / dx;
            let i = r.round();
            ((r - i).abs() <= 1e-6).then(|| (i as i64).rem_euclid(n as i64) as usize)
        };
        let mut slot: Vec<Option<usize>> = vec![None; n1 * n3];
        for (&node, c) in nodes.iter().zip(coords) {
            if (c[1] - x2).abs() > 1e-6 * dx {
                return Err(Error::Coupling(format!("node {node} is not on the boundary plane")));
            }
            let (Some(i), Some(k)) = (snap(c[0] - origin[0], n1), snap(c[2] - origin[1], n3)) else {
                return Err(Error::Coupling(format!("node {node} is not on the boundary grid")));
            };
            let s = &mut slot[k * n1 + i];
            if s.is_some() {
                return Err(Error::Coupling(format!("two FE nodes map to boundary point ({i}, {k})")));
            }
            *s = Some(node);
        }
        let nodes = slot
            .into_iter()
            .enumerate()
            .map(|(p, s)| s.ok_or_else(|| Error::Coupling(format!("boundary point {p} has no FE node"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            side,
            nodes,
            area: dx * dx,
            dx,
        })
    }

    /// Binds node plane `j` of a laterally periodic layout.
    pub fn for_plane(layout: &DofLayout, j: usize, side: Side) -> Result<Self> {
        if layout.lateral() != Lateral::Periodic {
            return Err(Error::Coupling("boundary planes need laterally periodic FE faces".into()));
        }
        if j >= layout.node_planes() {
            return Err(Error::Coupling(format!("node plane {j} does not exist")));
        }
        let nodes: Vec<usize> = layout.plane(j).collect();
        let coords: Vec<[f64; 3]> = nodes.iter().map(|&n| layout.node_coords(n)).collect();
        let [n1, n3] = layout.plane_dims();
        let origin = layout.node_coords(layout.node(0, j, 0));
        Self::by_coordinates(side, &nodes, &coords, n1, n3, layout.dx(), [origin[0], origin[2]])
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Sum of the nodal areas.
    pub fn total_area(&self) -> f64 {
        self.area * self.nodes.len() as f64
    }

    /// Gathers displacement and predicted velocity of the bound nodes.
    pub fn exchange(&self, state: &SimulationState, u_out: &mut [f64], v_out: &mut [f64]) -> Result<()> {
        for (p, &node) in self.nodes.iter().enumerate() {
            for c in 0..3 {
                let (u, v) = (state.u[3 * node + c], state.v_pred[3 * node + c]);
                if !(u.is_finite() && v.is_finite()) {
                    return Err(Error::NonFinite {
                        boundary: self.side as usize,
                        node,
                    });
                }
                u_out[3 * p + c] = u;
                v_out[3 * p + c] = v;
            }
        }
        Ok(())
    }

    /// Adds `A tau` to the forces of the bound nodes.
    pub fn inject(&self, traction: &[f64], force: &mut [f64]) {
        for (p, &node) in self.nodes.iter().enumerate() {
            for c in 0..3 {
                force[3 * node + c] += self.area * traction[3 * p + c];
            }
        }
    }
}

/// A boundary closure together with its binding and exchange buffers.
#[derive(Debug, Clone)]
pub struct BoundaryCoupling {
    pub binding: CouplerBinding,
    pub boundary: SbiBoundary,
    u: Vec<f64>,
    v: Vec<f64>,
    traction: Vec<f64>,
}

impl BoundaryCoupling {
    pub fn new(binding: CouplerBinding, boundary: SbiBoundary) -> Result<Self> {
        if binding.side() != boundary.side() {
            return Err(Error::Coupling("binding and boundary face different half-spaces".into()));
        }
        if (binding.dx() - boundary.dx()).abs() > 1e-9 * binding.dx() {
            return Err(Error::Coupling(format!(
                "FE spacing {} differs from boundary spacing {}",
                binding.dx(),
                boundary.dx()
            )));
        }
        let n = 3 * boundary.node_count();
        if binding.nodes().len() * 3 != n {
            return Err(Error::Coupling("binding and boundary grids differ in size".into()));
        }
        Ok(Self {
            binding,
            boundary,
            u: vec![0.0; n],
            v: vec![0.0; n],
            traction: vec![0.0; n],
        })
    }

    /// Latest boundary traction in boundary grid order.
    pub fn traction(&self) -> &[f64] {
        &self.traction
    }

    pub fn exchange(&mut self, state: &SimulationState) -> Result<()> {
        self.binding.exchange(state, &mut self.u, &mut self.v)
    }

    pub fn evaluate(&mut self, step: u64) -> Result<()> {
        self.boundary.push_history(step, &self.u)?;
        self.boundary.traction(&self.v, &mut self.traction)
    }

    pub fn inject(&self, force: &mut [f64]) {
        self.binding.inject(&self.traction, force);
    }
}

/// Per-step summary handed to progress callbacks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u64,
    pub time: f64,
    pub max_slip_rate: f64,
    /// Largest distance along `x1` between slipping fault nodes (m).
    pub rupture_extent: f64,
}

/// Advances `state` by one step. `force` is scratch of the DOF count.
/// `trace`, when given, receives each phase as it runs.
#[allow(clippy::too_many_arguments)]
pub fn hybrid_step(
    model: &FeModel,
    state: &mut SimulationState,
    fixed: &Dirichlet,
    faults: &mut [FaultSurface],
    boundaries: &mut [BoundaryCoupling],
    force: &mut [f64],
    mut trace: Option<&mut Vec<StepPhase>>,
) -> Result<()> {
    let mut mark = |p: StepPhase| {
        if let Some(t) = trace.as_deref_mut() {
            t.push(p);
        }
    };
    for b in boundaries.iter() {
        if (b.boundary.dt() - state.dt).abs() > 1e-12 * state.dt {
            return Err(Error::TimeStep(format!(
                "boundary time step {} differs from FE time step {}",
                b.boundary.dt(),
                state.dt
            )));
        }
    }
    mark(StepPhase::Predict);
    predict(state, fixed);

    mark(StepPhase::Exchange);
    for b in boundaries.iter_mut() {
        b.exchange(state)?;
    }

    mark(StepPhase::SbiTraction);
    let next = state.step + 1;
    boundaries.par_iter_mut().map(|b| b.evaluate(next)).collect::<Result<Vec<_>>>()?;

    mark(StepPhase::NeumannForce);
    model.stiffness().apply(&state.u, force);
    force.iter_mut().for_each(|f| *f = -*f);
    for b in boundaries.iter() {
        b.inject(force);
    }

    mark(StepPhase::FaultTraction);
    for f in faults.iter_mut() {
        f.solve(state, model.mass(), force)?;
    }

    mark(StepPhase::Acceleration);
    accelerations_in_place(force, model.mass(), fixed);

    mark(StepPhase::VelocityCorrection);
    correct_velocity(state, force, fixed);
    for f in faults.iter_mut() {
        f.update(state);
    }
    state.check_stability(BLOWUP_VELOCITY)
}

/// Owns everything a hybrid run advances.
#[derive(Debug)]
pub struct HybridSolver {
    model: FeModel,
    state: SimulationState,
    fixed: Dirichlet,
    faults: Vec<FaultSurface>,
    boundaries: Vec<BoundaryCoupling>,
    force: Vec<f64>,
    trace: Option<Vec<StepPhase>>,
}

impl HybridSolver {
    pub fn new(
        model: FeModel,
        mut faults: Vec<FaultSurface>,
        boundaries: Vec<BoundaryCoupling>,
        dt: f64,
    ) -> Result<Self> {
        let dofs = model.dof_count();
        for b in &boundaries {
            if b.binding.nodes().iter().any(|&n| 3 * n + 2 >= dofs) {
                return Err(Error::Coupling("binding refers to nodes outside the model".into()));
            }
            if (b.boundary.dt() - dt).abs() > 1e-12 * dt {
                return Err(Error::TimeStep(format!(
                    "boundary time step {} differs from FE time step {dt}",
                    b.boundary.dt()
                )));
            }
        }
        for f in &mut faults {
            f.compute_impedance(model.mass(), dt)?;
        }
        Ok(Self {
            state: SimulationState::new(dofs, dt),
            force: vec![0.0; dofs],
            model,
            fixed: Dirichlet::default(),
            faults,
            boundaries,
            trace: None,
        })
    }

    pub fn with_dirichlet(mut self, fixed: Dirichlet) -> Self {
        self.fixed = fixed;
        self
    }

    /// Records the phase sequence of every following step.
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn trace(&self) -> Option<&[StepPhase]> {
        self.trace.as_deref()
    }

    pub fn model(&self) -> &FeModel {
        &self.model
    }

    pub fn state(&self) -> &SimulationState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut SimulationState {
        &mut self.state
    }

    pub fn fixed(&self) -> &Dirichlet {
        &self.fixed
    }

    pub fn faults(&self) -> &[FaultSurface] {
        &self.faults
    }

    pub fn faults_mut(&mut self) -> &mut [FaultSurface] {
        &mut self.faults
    }

    /// Simultaneous access to the model and everything a step mutates.
    pub fn parts_mut(
        &mut self,
    ) -> (&FeModel, &mut SimulationState, &Dirichlet, &mut [FaultSurface], &mut [BoundaryCoupling]) {
        (&self.model, &mut self.state, &self.fixed, &mut self.faults, &mut self.boundaries)
    }

    pub fn boundaries(&self) -> &[BoundaryCoupling] {
        &self.boundaries
    }

    pub fn boundaries_mut(&mut self) -> &mut [BoundaryCoupling] {
        &mut self.boundaries
    }

    pub fn step(&mut self) -> Result<()> {
        hybrid_step(
            &self.model,
            &mut self.state,
            &self.fixed,
            &mut self.faults,
            &mut self.boundaries,
            &mut self.force,
            self.trace.as_mut(),
        )
    }

    pub fn report(&self) -> StepReport {
        let mut max_rate: f64 = 0.0;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for f in &self.faults {
            for (i, v) in f.slip_rate().iter().enumerate() {
                let r = v[0].hypot(v[1]);
                max_rate = max_rate.max(r);
                if r > crate::record::RUPTURE_THRESHOLD {
                    let x = f.coords(i)[0];
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
            }
        }
        StepReport {
            step: self.state.step,
            time: self.state.time,
            max_slip_rate: max_rate,
            rupture_extent: if hi >= lo { hi - lo } else { 0.0 },
        }
    }

    /// Runs `steps` steps, calling `progress` after each.
    pub fn run(&mut self, steps: u64, mut progress: impl FnMut(&StepReport)) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
            progress(&self.report());
        }
        Ok(())
    }
}

/// Boundary plane, side and node set for each boundary of a strip: the top
/// plane always faces the upper half-space, and the bottom plane faces the
/// lower one unless the bottom carries a symmetric fault.
pub fn strip_boundaries(layout: &DofLayout, symmetric_bottom: bool) -> Vec<(usize, Side)> {
    let top = layout.node_planes() - 1;
    let mut out = vec![(top, Side::Upper)];
    if !symmetric_bottom {
        out.insert(0, (0, Side::Lower));
    }
    out
}

/// Checks that every FE node appears in at most one binding.
pub fn check_disjoint(bindings: &[&CouplerBinding]) -> Result<()> {
    let mut seen: HashMap<usize, usize> = HashMap::new();
    for (b, binding) in bindings.iter().enumerate() {
        for &n in binding.nodes() {
            if let Some(other) = seen.insert(n, b) {
                return Err(Error::Coupling(format!("node {n} is bound by boundaries {other} and {b}")));
            }
        }
    }
    Ok(())
}
