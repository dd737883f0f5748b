//! Randomized fault states on small meshes for the stick-slip resolution.

use fesbi::fault::{FaultMode, FaultPatch, FaultSpec, FaultSurface, SlipWeakening};
use fesbi::fem::{cfl_timestep, FeModel, SimulationState, DEFAULT_CFL_SAFETY};
use fesbi::mesh::build_grid_at;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct FaultCase {
    pub model: FeModel,
    pub fault: FaultSurface,
    pub state: SimulationState,
    /// `f - K u_{t+1}` before fault forces.
    pub force: Vec<f64>,
}

fn spec(x2: f64, mu_s: f64, rng: &mut ChaCha8Rng) -> FaultSpec {
    FaultSpec {
        x2,
        rupture: FaultPatch::centered(0.0, 0.0, 1e6, 1e6),
        friction: SlipWeakening::new(mu_s, 0.5, 0.4).unwrap(),
        tau0: rng.gen_range(-30e6..30e6),
        tau0_dip: rng.gen_range(-30e6..30e6),
        sigma0: 100e6,
        friction_patches: Vec::new(),
        nucleation: None,
    }
}

/// A fault with static friction `mu_s` on a mesh of at most 4^3 elements in
/// a random predicted state. Two-sided faults sit on the middle plane of a
/// 4^3 mesh, symmetric ones on the bottom of a 4 x 2 x 4 mesh.
pub fn random_case(mode: FaultMode, mu_s: f64, seed: u64) -> FaultCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let host = super::host_rock();
    let (model, x2) = match mode {
        FaultMode::TwoSided => {
            let g = build_grid_at([400.0, 400.0, 400.0], 100.0, [-200.0, -200.0, -200.0]).unwrap();
            (FeModel::new(g, &[host], &[2]).unwrap(), 0.0)
        }
        FaultMode::Symmetric => {
            let g = build_grid_at([400.0, 200.0, 400.0], 100.0, [-200.0, 0.0, -200.0]).unwrap();
            (FeModel::new(g, &[host], &[]).unwrap(), 0.0)
        }
    };
    let dt = cfl_timestep(100.0, &[host], DEFAULT_CFL_SAFETY).unwrap();
    let mut fault = FaultSurface::new(&spec(x2, mu_s, &mut rng), model.layout(), mode).unwrap();
    fault.compute_impedance(model.mass(), dt).unwrap();
    let n = model.dof_count();
    let mut state = SimulationState::new(n, dt);
    for x in state.u.iter_mut() {
        *x = rng.gen_range(-0.05..0.05);
    }
    for x in state.v_pred.iter_mut() {
        *x = rng.gen_range(-2.0..2.0);
    }
    for x in state.a.iter_mut() {
        *x = rng.gen_range(-50.0..50.0);
    }
    let mut force = vec![0.0; n];
    model.stiffness().apply(&state.u, &mut force);
    for f in force.iter_mut() {
        *f = -*f + rng.gen_range(-1e6..1e6);
    }
    FaultCase {
        model,
        fault,
        state,
        force,
    }
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Largest relative free-velocity jump left at sticking nodes after the
/// resolved fault forces are applied, and the number of sticking nodes.
pub fn stick_residual(case: &mut FaultCase) -> (f64, usize) {
    let mass = case.model.mass();
    let before: Vec<f64> = (0..case.fault.len())
        .map(|i| norm(case.fault.free_jump(&case.state, mass, &case.force, i)))
        .collect();
    case.fault.solve(&case.state, mass, &mut case.force).unwrap();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (i, b) in before.iter().enumerate() {
        if !case.fault.sticking()[i] {
            continue;
        }
        count += 1;
        let after = norm(case.fault.free_jump(&case.state, mass, &case.force, i));
        worst = worst.max(after / b);
    }
    (worst, count)
}
