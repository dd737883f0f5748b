//! Per-step timing of the FE strip and of one boundary-integral closure.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::converge::linear_fit;
use crate::coupler::HybridSolver;
use crate::error::{Error, Result};
use crate::fem::{cfl_timestep, FeModel, DEFAULT_CFL_SAFETY};
use crate::material::ElasticMaterial;
use crate::mesh::build_grid_at;
use crate::sbi::boundary::{SbiBoundary, SbiSettings, Side};
use crate::sbi::kernels::HalfSpaceKernels;

const DX: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    /// Untimed steps before measuring.
    pub warmup: usize,
    /// Timed steps; the reported time is their median.
    pub measure: usize,
    /// Longest run the boundary history is sized for.
    pub run_steps: usize,
    pub sbi: SbiSettings,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            warmup: 3,
            measure: 15,
            run_steps: 4000,
            sbi: SbiSettings::default(),
        }
    }
}

fn host() -> ElasticMaterial {
    ElasticMaterial::from_wave_speeds(2670.0, 6000.0, 3464.0).expect("valid host rock")
}

fn median(mut x: Vec<f64>) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

fn time_steps(settings: &BenchSettings, mut step: impl FnMut() -> Result<()>) -> Result<f64> {
    for _ in 0..settings.warmup {
        step()?;
    }
    let mut samples = Vec::with_capacity(settings.measure);
    for _ in 0..settings.measure.max(1) {
        let t = Instant::now();
        step()?;
        samples.push(t.elapsed().as_secs_f64());
    }
    Ok(median(samples))
}

/// Median wall time of one explicit FE step on an `n1 x n2 x n3` strip
/// without faults or closures.
pub fn fe_step_time(n1: usize, n2: usize, n3: usize, settings: &BenchSettings) -> Result<f64> {
    let material = host();
    let grid = build_grid_at([n1 as f64 * DX, n2 as f64 * DX, n3 as f64 * DX], DX, [0.0; 3])?;
    let model = FeModel::new(grid, &[material], &[])?;
    let dt = cfl_timestep(DX, &[material], DEFAULT_CFL_SAFETY)?;
    let mut solver = HybridSolver::new(model, Vec::new(), Vec::new(), dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for u in solver.state_mut().u.iter_mut() {
        *u = rng.gen_range(-1e-3..1e-3);
    }
    time_steps(settings, || solver.step())
}

/// Median wall time of one closure step (history push, nonlocal term and
/// traction) on an `n1 x n3` plane.
pub fn sbi_step_time(n1: usize, n3: usize, settings: &BenchSettings) -> Result<f64> {
    let material = host();
    let dt = cfl_timestep(DX, &[material], DEFAULT_CFL_SAFETY)?;
    let mut boundary = SbiBoundary::new(
        Side::Upper,
        material,
        n1,
        n3,
        DX,
        dt,
        &HalfSpaceKernels,
        &settings.sbi,
        settings.run_steps,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 3 * n1 * n3;
    let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
    let mut tau = vec![0.0; n];
    let mut step = 0_u64;
    time_steps(settings, || {
        step += 1;
        boundary.push_history(step, &u)?;
        boundary.traction(&v, &mut tau)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeRow {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbiRow {
    pub n1: usize,
    pub n3: usize,
    pub seconds: f64,
    /// FE time of one element layer on the same plane, from a linear fit
    /// in `N2`.
    pub fe_layer_seconds: f64,
}

impl SbiRow {
    pub fn ratio_to_layer(&self) -> f64 {
        self.seconds / self.fe_layer_seconds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub settings: BenchSettings,
    /// FE step time against `N2` on the first plane size.
    pub fe_depth: Vec<FeRow>,
    /// Coefficient of determination of the linear fit of `fe_depth`.
    pub fe_depth_r2: f64,
    /// FE step time at the smallest `N2` for every plane size.
    pub fe_plane: Vec<FeRow>,
    pub sbi: Vec<SbiRow>,
    /// Log-log slopes of step time against `N1 N3`.
    pub fe_plane_exponent: f64,
    pub sbi_plane_exponent: f64,
}

impl BenchReport {
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["kind", "n1", "n2", "n3", "seconds", "fe_layer_seconds"])?;
        for r in self.fe_depth.iter().chain(&self.fe_plane) {
            w.write_record(["fe".into(), r.n1.to_string(), r.n2.to_string(), r.n3.to_string(), format!("{:e}", r.seconds), String::new()])?;
        }
        for r in &self.sbi {
            w.write_record([
                "sbi".into(),
                r.n1.to_string(),
                "0".into(),
                r.n3.to_string(),
                format!("{:e}", r.seconds),
                format!("{:e}", r.fe_layer_seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Times the FE step for every `N2` on the first plane and for every plane
/// at the smallest `N2`, and the closure step for every plane.
pub fn bench(planes: &[(usize, usize)], depths: &[usize], settings: &BenchSettings) -> Result<BenchReport> {
    if planes.is_empty() || depths.len() < 2 {
        return Err(Error::Config("bench needs at least one plane size and two strip depths".into()));
    }
    let (p1, p3) = planes[0];
    let mut fe_depth = Vec::new();
    for &n2 in depths {
        fe_depth.push(FeRow {
            n1: p1,
            n2,
            n3: p3,
            seconds: fe_step_time(p1, n2, p3, settings)?,
        });
    }
    let x: Vec<f64> = fe_depth.iter().map(|r| r.n2 as f64).collect();
    let y: Vec<f64> = fe_depth.iter().map(|r| r.seconds).collect();
    let (_, _, fe_depth_r2) = linear_fit(&x, &y);

    let n2_small = *depths.iter().min().expect("non-empty");
    let n2_large = *depths.iter().max().expect("non-empty");
    let mut fe_plane = Vec::new();
    let mut sbi = Vec::new();
    for &(n1, n3) in planes {
        let small = fe_step_time(n1, n2_small, n3, settings)?;
        let large = if n2_large == n2_small {
            small
        } else {
            fe_step_time(n1, n2_large, n3, settings)?
        };
        let layer = (large - small) / (n2_large - n2_small) as f64;
        fe_plane.push(FeRow {
            n1,
            n2: n2_small,
            n3,
            seconds: small,
        });
        sbi.push(SbiRow {
            n1,
            n3,
            seconds: sbi_step_time(n1, n3, settings)?,
            fe_layer_seconds: layer,
        });
    }
    let exponent = |rows: Vec<(usize, f64)>| -> f64 {
        if rows.len() < 2 {
            return f64::NAN;
        }
        let x: Vec<f64> = rows.iter().map(|r| (r.0 as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
        linear_fit(&x, &y).0
    };
    let fe_plane_exponent = exponent(fe_plane.iter().map(|r| (r.n1 * r.n3, r.seconds)).collect());
    let sbi_plane_exponent = exponent(sbi.iter().map(|r| (r.n1 * r.n3, r.seconds)).collect());
    Ok(BenchReport {
        settings: settings.clone(),
        fe_depth,
        fe_depth_r2,
        fe_plane,
        sbi,
        fe_plane_exponent,
        sbi_plane_exponent,
    })
}
