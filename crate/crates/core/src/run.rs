//! Assembly of a hybrid simulation from a [`Scenario`] and the stepping loop
//! that records the faults.

use crate::coupler::{strip_boundaries, BoundaryCoupling, CouplerBinding, HybridSolver, StepReport};
use crate::error::{Error, Result};
use crate::fault::{FaultMode, FaultSurface};
use crate::fem::FeModel;
use crate::material::ElasticMaterial;
use crate::mesh::{assign_regions, build_grid_at};
use crate::record::{FaultHistories, FaultRecorder};
use crate::sbi::boundary::{SbiBoundary, Side};
use crate::sbi::kernels::{HalfSpaceKernels, KernelProvider};
use crate::scenario::Scenario;

#[derive(Debug)]
pub struct Simulation {
    scenario: Scenario,
    solver: HybridSolver,
    recorders: Vec<FaultRecorder>,
    steps: u64,
    warnings: Vec<String>,
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        Self::with_kernels(scenario, &HalfSpaceKernels)
    }

    pub fn with_kernels(scenario: &Scenario, kernels: &dyn KernelProvider) -> Result<Self> {
        let warnings = scenario.validate()?;
        let materials: Vec<ElasticMaterial> = scenario.built_materials()?;
        let dt = scenario.time_step()?;
        let steps = scenario.steps()?;
        let dx = scenario.dx;
        let grid = build_grid_at(scenario.domain.extents(), dx, scenario.domain.origin())?;
        let grid = assign_regions(grid, &scenario.regions, &materials)?;
        let mode = if scenario.symmetric {
            FaultMode::Symmetric
        } else {
            FaultMode::TwoSided
        };
        let mut splits = Vec::new();
        if mode == FaultMode::TwoSided {
            for f in &scenario.faults {
                let j = grid
                    .layer_of(f.x2)
                    .ok_or_else(|| Error::Config(format!("fault at x2 = {} is not on a node plane", f.x2)))?;
                splits.push(j);
            }
        }
        let model = FeModel::new(grid, &materials, &splits)?;
        let layout = model.layout();
        let [n1, _, n3] = layout.n();
        let faults = scenario
            .faults
            .iter()
            .map(|f| FaultSurface::new(f, layout, mode))
            .collect::<Result<Vec<_>>>()?;
        let mut boundaries = Vec::new();
        for (j, side) in strip_boundaries(layout, scenario.symmetric) {
            let layer = match side {
                Side::Upper => j - 1,
                Side::Lower => 0,
            };
            let m = model.grid().layer_material(layer).ok_or_else(|| {
                Error::Config(format!("element layer {layer} next to a virtual boundary is not homogeneous"))
            })?;
            let boundary = SbiBoundary::new(side, materials[m], n1, n3, dx, dt, kernels, &scenario.sbi, steps as usize)?;
            let binding = CouplerBinding::for_plane(layout, j, side)?;
            boundaries.push(BoundaryCoupling::new(binding, boundary)?);
        }
        let mut recorders = Vec::new();
        for (index, fault) in faults.iter().enumerate() {
            let stations: Vec<_> = scenario.stations.iter().filter(|s| s.fault == index).cloned().collect();
            let coords = (0..fault.len()).map(|i| fault.coords(i)).collect();
            recorders.push(FaultRecorder::new(&stations, coords, 0.5 * dx)?.with_threshold(scenario.rupture_threshold));
        }
        let solver = HybridSolver::new(model, faults, boundaries, dt)?;
        Ok(Self {
            scenario: scenario.clone(),
            solver,
            recorders,
            steps,
            warnings,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn solver(&self) -> &HybridSolver {
        &self.solver
    }

    pub fn solver_mut(&mut self) -> &mut HybridSolver {
        &mut self.solver
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Number of steps that cover the scenario duration.
    pub fn total_steps(&self) -> u64 {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.solver.state().dt
    }

    pub fn time(&self) -> f64 {
        self.solver.state().time
    }

    pub fn recorders(&self) -> &[FaultRecorder] {
        &self.recorders
    }

    /// One hybrid step followed by recording.
    pub fn step(&mut self) -> Result<StepReport> {
        self.solver.step()?;
        let time = self.solver.state().time;
        for (rec, fault) in self.recorders.iter_mut().zip(self.solver.faults()) {
            rec.record(time, fault.slip(), fault.slip_rate(), fault.traction(), fault.normal_stress());
        }
        Ok(self.solver.report())
    }

    /// Runs the remaining steps of the scenario.
    pub fn run(&mut self, mut progress: impl FnMut(&StepReport)) -> Result<()> {
        while self.solver.state().step < self.steps {
            let report = self.step()?;
            progress(&report);
        }
        Ok(())
    }

    pub fn finish(self) -> Vec<FaultHistories> {
        let faults = self.solver.faults();
        self.recorders
            .into_iter()
            .zip(faults)
            .map(|(rec, f)| rec.finish(f.slip().to_vec()))
            .collect()
    }
}

/// Runs `scenario` to completion and returns the fault recordings.
pub fn run_scenario(scenario: &Scenario) -> Result<Vec<FaultHistories>> {
    let mut sim = Simulation::new(scenario)?;
    sim.run(|_| {})?;
    Ok(sim.finish())
}
