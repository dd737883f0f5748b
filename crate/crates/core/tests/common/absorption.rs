//! Normal-incidence plane wave through a thin strip closed by two
//! boundary-integral half-spaces.
//!
//! The incident wave `v_inc(t)` travels up from the lower half-space. It
//! enters the lower closure as the far-field traction `2 Z v_inc`, where `Z`
//! is the impedance of the polarisation. Whatever the strip sends back down
//! shows up as `v - v_inc` on the lower plane.

use fesbi::coupler::{BoundaryCoupling, CouplerBinding, HybridSolver};
use fesbi::fem::{cfl_timestep, FeModel, DEFAULT_CFL_SAFETY};
use fesbi::mesh::build_grid_at;
use fesbi::sbi::boundary::{SbiBoundary, SbiSettings, Side};
use fesbi::sbi::kernels::HalfSpaceKernels;

use super::host_rock;

pub struct Absorption {
    /// Reflected over incident energy.
    pub reflection: f64,
    /// Transmitted over incident energy.
    pub transmission: f64,
}

/// Sends a Gaussian velocity pulse polarised along `component` (1 for P,
/// 0 or 2 for S) through a strip `layers` elements thick.
pub fn plane_wave(component: usize, layers: usize) -> Absorption {
    let material = host_rock();
    let dx = 100.0;
    let (n1, n3) = (4, 4);
    let grid = build_grid_at([n1 as f64 * dx, layers as f64 * dx, n3 as f64 * dx], dx, [0.0; 3]).unwrap();
    let model = FeModel::new(grid, &[material], &[]).unwrap();
    let dt = cfl_timestep(dx, &[material], DEFAULT_CFL_SAFETY).unwrap();
    let settings = SbiSettings::default();
    let speed = if component == 1 { material.cp() } else { material.cs() };
    let width = 6.0 * dx / speed;
    let t0 = 5.0 * width;
    let duration = 2.0 * t0 + layers as f64 * dx / material.cs() + 10.0 * width;
    let steps = (duration / dt).ceil() as usize;
    let mut bounds = Vec::new();
    for (j, side) in [(0, Side::Lower), (layers, Side::Upper)] {
        let binding = CouplerBinding::for_plane(model.layout(), j, side).unwrap();
        let boundary =
            SbiBoundary::new(side, material, n1, n3, dx, dt, &HalfSpaceKernels, &settings, steps).unwrap();
        bounds.push(BoundaryCoupling::new(binding, boundary).unwrap());
    }
    let lower_nodes = bounds[0].binding.nodes().to_vec();
    let upper_nodes = bounds[1].binding.nodes().to_vec();
    let impedance = bounds[0].boundary.eta()[component] * material.shear_impedance();
    let mut solver = HybridSolver::new(model, Vec::new(), bounds, dt).unwrap();
    let incident = |t: f64| (-((t - t0) / width).powi(2)).exp();
    let (mut e_inc, mut e_ref, mut e_tra) = (0.0, 0.0, 0.0);
    for n in 0..steps {
        let t_next = (n + 1) as f64 * dt;
        let mut far = [0.0; 3];
        far[component] = 2.0 * impedance * incident(t_next);
        solver.boundaries_mut()[0].boundary.set_far_field(far);
        solver.step().unwrap();
        let v = &solver.state().v;
        let mean = |nodes: &[usize]| nodes.iter().map(|&p| v[3 * p + component]).sum::<f64>() / nodes.len() as f64;
        let inc = incident(t_next);
        e_inc += inc * inc;
        e_ref += (mean(&lower_nodes) - inc).powi(2);
        e_tra += mean(&upper_nodes).powi(2);
    }
    Absorption {
        reflection: e_ref / e_inc,
        transmission: e_tra / e_inc,
    }
}
