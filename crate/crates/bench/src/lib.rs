//! Fixtures shared by the criterion benchmarks.

use fesbi::coupler::HybridSolver;
use fesbi::fem::{cfl_timestep, FeModel, DEFAULT_CFL_SAFETY};
use fesbi::material::ElasticMaterial;
use fesbi::mesh::build_grid_at;
use fesbi::sbi::boundary::{SbiBoundary, SbiSettings, Side};
use fesbi::sbi::kernels::HalfSpaceKernels;
use fesbi::Result;

pub const DX: f64 = 100.0;

/// Number of steps the boundary history is sized for.
pub const RUN_STEPS: usize = 4000;

pub fn host() -> ElasticMaterial {
    ElasticMaterial::from_wave_speeds(2670.0, 6000.0, 3464.0).expect("valid host rock")
}

/// Smooth nonzero field so that every kernel does real arithmetic.
pub fn pattern(n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|i| scale * (0.37 * i as f64).sin()).collect()
}

/// Fault-free FE strip of `n1 x n2 x n3` elements with a displaced start.
pub fn fe_solver(n1: usize, n2: usize, n3: usize) -> Result<HybridSolver> {
    let material = host();
    let grid = build_grid_at([n1 as f64 * DX, n2 as f64 * DX, n3 as f64 * DX], DX, [0.0; 3])?;
    let model = FeModel::new(grid, &[material], &[])?;
    let dt = cfl_timestep(DX, &[material], DEFAULT_CFL_SAFETY)?;
    let mut solver = HybridSolver::new(model, Vec::new(), Vec::new(), dt)?;
    let n = solver.state_mut().u.len();
    solver.state_mut().u.copy_from_slice(&pattern(n, 1e-3));
    Ok(solver)
}

/// Boundary-integral closure on an `n1 x n3` plane.
pub fn sbi_boundary(n1: usize, n3: usize) -> Result<SbiBoundary> {
    let material = host();
    let dt = cfl_timestep(DX, &[material], DEFAULT_CFL_SAFETY)?;
    SbiBoundary::new(
        Side::Upper,
        material,
        n1,
        n3,
        DX,
        dt,
        &HalfSpaceKernels,
        &SbiSettings::default(),
        RUN_STEPS,
    )
}
