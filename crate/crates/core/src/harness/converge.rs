//! Grid convergence study: slip-field error of coarse runs against the
//! finest run at a fixed time.
//!
//! The error of a run is the L2 norm of its slip field minus the reference
//! slip field, sampled on the nodes of the coarsest grid and divided by the
//! L2 norm of the reference there. Slip at the comparison time is linearly
//! interpolated between the two surrounding time levels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{interpolate, Station};
use crate::run::Simulation;
use crate::scenario::Scenario;

/// Slip field of the first fault at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SlipField {
    pub dx: f64,
    pub coords: Vec<[f64; 2]>,
    pub slip: Vec<[f64; 2]>,
}

impl SlipField {
    fn index_of(&self, x: [f64; 2]) -> Option<usize> {
        let tol = 1e-6 * self.dx;
        self.coords
            .iter()
            .position(|c| (c[0] - x[0]).abs() <= tol && (c[1] - x[1]).abs() <= tol)
    }
}

/// Slip history of one station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationTrace {
    pub name: String,
    pub time: Vec<f64>,
    pub slip: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRun {
    pub field: SlipField,
    pub station: Option<StationTrace>,
}

/// Runs `scenario` to `at` and returns the slip field at exactly `at`.
/// When `station` is given the run continues to the scenario duration and
/// the station's full strike-slip history is returned as well.
pub fn slip_at(scenario: &Scenario, at: f64, station: Option<&str>) -> Result<ConvergenceRun> {
    let mut s = scenario.clone();
    s.duration = s.duration.max(at);
    let mut sim = Simulation::new(&s)?;
    let dt = sim.dt();
    let steps = (at / dt).ceil() as u64;
    let mut previous = sim.solver().faults()[0].slip().to_vec();
    for _ in 0..steps {
        previous.copy_from_slice(sim.solver().faults()[0].slip());
        sim.step()?;
    }
    let fault = &sim.solver().faults()[0];
    let t1 = sim.time();
    let w = if steps == 0 { 1.0 } else { 1.0 - (t1 - at) / dt };
    let slip: Vec<[f64; 2]> = fault
        .slip()
        .iter()
        .zip(&previous)
        .map(|(b, a)| [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])])
        .collect();
    let coords = (0..fault.len()).map(|i| fault.coords(i)).collect();
    if station.is_some() {
        for _ in steps..sim.total_steps() {
            sim.step()?;
        }
    }
    let histories = sim.finish();
    let trace = match station {
        None => None,
        Some(name) => {
            let st = histories[0]
                .station(name)
                .ok_or_else(|| Error::Config(format!("station {name} is not on the first fault")))?;
            Some(StationTrace {
                name: name.to_string(),
                time: st.time.clone(),
                slip: st.slip_strike(),
            })
        }
    };
    Ok(ConvergenceRun {
        field: SlipField { dx: s.dx, coords, slip },
        station: trace,
    })
}

/// Relative L2 slip error of `test` against `reference` on the nodes of
/// `sample`. Fails when a sample node is missing from either grid.
pub fn relative_l2(test: &SlipField, reference: &SlipField, sample: &SlipField) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for c in &sample.coords {
        let missing = || Error::NotNested(format!("node ({}, {}) is not on every grid", c[0], c[1]));
        let a = test.slip[test.index_of(*c).ok_or_else(missing)?];
        let r = reference.slip[reference.index_of(*c).ok_or_else(missing)?];
        num += (a[0] - r[0]).powi(2) + (a[1] - r[1]).powi(2);
        den += r[0].powi(2) + r[1].powi(2);
    }
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((num / den).sqrt())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

/// Least-squares line `y = a x + b`; returns `(a, b, r^2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// Checks that every spacing is an integer multiple of the finest one and
/// that all grids share their node positions.
pub fn check_nested(scenarios: &[Scenario], reference: &Scenario) -> Result<()> {
    let h = reference.dx;
    let o = reference.domain.origin();
    for s in scenarios {
        let r = s.dx / h;
        if r < 1.0 - 1e-9 || (r - r.round()).abs() > 1e-9 * r {
            return Err(Error::NotNested(format!("dx = {} is not a multiple of the reference dx = {h}", s.dx)));
        }
        let so = s.domain.origin();
        for a in [0, 2] {
            let shift = (so[a] - o[a]) / h;
            if (shift - shift.round()).abs() > 1e-9 * shift.abs().max(1.0) {
                return Err(Error::NotNested(format!("grid with dx = {} is shifted against the reference", s.dx)));
            }
        }
        if s.faults.len() != reference.faults.len()
            || s.faults.iter().zip(&reference.faults).any(|(a, b)| a.x2 != b.x2)
        {
            return Err(Error::NotNested("fault planes differ between grids".into()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub dx: f64,
    pub error: f64,
}

/// Absolute slip error at one station against the reference, on the
/// reference sampling, with both slip histories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTrace {
    pub dx: f64,
    pub station: String,
    pub time: Vec<f64>,
    pub error: Vec<f64>,
    pub slip: Vec<f64>,
    pub reference_slip: Vec<f64>,
}

impl ErrorTrace {
    /// First time either slip history exceeds `slip` in magnitude.
    pub fn arrival(&self, slip: f64) -> Option<f64> {
        self.time
            .iter()
            .zip(self.slip.iter().zip(&self.reference_slip))
            .find(|(_, (a, b))| a.abs() > slip || b.abs() > slip)
            .map(|(t, _)| *t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub reference_dx: f64,
    /// Time the slip fields are compared at (s).
    pub time: f64,
    pub rows: Vec<ConvergenceRow>,
    pub slope: f64,
    pub traces: Vec<ErrorTrace>,
}

impl ConvergenceReport {
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["dx", "relative_l2_error"])?;
        for r in &self.rows {
            w.write_record([format!("{}", r.dx), format!("{:.9e}", r.error)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Moves station `name` of `coarsest` to its nearest node on that grid,
/// which every nested finer grid shares.
fn snap_station(coarsest: &Scenario, name: &str) -> Result<Station> {
    let st = coarsest
        .stations
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Config(format!("unknown station {name}")))?;
    let o = coarsest.domain.origin();
    let snap = |x: f64, o: f64| o + ((x - o) / coarsest.dx).round() * coarsest.dx;
    Ok(Station::new(name, snap(st.x1, o[0]), snap(st.x3, o[2])))
}

/// Runs `build(dx)` for each coarse spacing and for `reference_dx`, and
/// compares slip fields at time `at`. When `station` is given, also returns
/// its slip error history for every coarse run, recorded at the coarsest-grid
/// node nearest the station. Other stations are not recorded.
pub fn converge(
    build: impl Fn(f64) -> Result<Scenario>,
    dxs: &[f64],
    reference_dx: f64,
    at: f64,
    station: Option<&str>,
) -> Result<ConvergenceReport> {
    if dxs.is_empty() {
        return Err(Error::Config("no grid spacings to compare".into()));
    }
    if dxs.iter().any(|&d| d <= reference_dx) {
        return Err(Error::Config("the reference spacing must be the finest".into()));
    }
    let mut reference = build(reference_dx)?;
    let mut coarse: Vec<Scenario> = dxs.iter().map(|&d| build(d)).collect::<Result<_>>()?;
    check_nested(&coarse, &reference)?;
    let coarsest = coarse.iter().max_by(|a, b| a.dx.total_cmp(&b.dx)).expect("at least one spacing");
    let stations = match station {
        Some(name) => vec![snap_station(coarsest, name)?],
        None => Vec::new(),
    };
    for s in coarse.iter_mut().chain(std::iter::once(&mut reference)) {
        s.stations = stations.clone();
    }
    let reference_run = slip_at(&reference, at, station)?;
    let runs: Vec<ConvergenceRun> = coarse.iter().map(|s| slip_at(s, at, station)).collect::<Result<_>>()?;
    let coarsest = runs
        .iter()
        .max_by(|a, b| a.field.dx.total_cmp(&b.field.dx))
        .expect("at least one run");
    let mut rows = Vec::new();
    for r in &runs {
        rows.push(ConvergenceRow {
            dx: r.field.dx,
            error: relative_l2(&r.field, &reference_run.field, &coarsest.field)?,
        });
    }
    let slope = loglog_slope(
        &rows.iter().map(|r| r.dx).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.error).collect::<Vec<_>>(),
    );
    let mut traces = Vec::new();
    if let Some(reference_trace) = &reference_run.station {
        for r in &runs {
            let t = r.station.as_ref().expect("station requested for every run");
            let slip: Vec<f64> = reference_trace.time.iter().map(|&tm| interpolate(&t.time, &t.slip, tm)).collect();
            traces.push(ErrorTrace {
                dx: r.field.dx,
                station: t.name.clone(),
                time: reference_trace.time.clone(),
                error: slip.iter().zip(&reference_trace.slip).map(|(a, b)| (a - b).abs()).collect(),
                slip,
                reference_slip: reference_trace.slip.clone(),
            });
        }
    }
    Ok(ConvergenceReport {
        reference_dx,
        time: at,
        rows,
        slope,
        traces,
    })
}
