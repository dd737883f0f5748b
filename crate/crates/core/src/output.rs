//! Run artifacts: station series, rupture-time maps, field snapshots,
//! space-time slip-rate records and the run manifest.
//!
//! Field arrays share one binary layout: text header lines `key value...`
//! terminated by a line `end`, followed by the values as little-endian `f64`
//! in row-major order with the first dimension fastest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, SyncSender};
use std::thread::JoinHandle;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::coupler::StepReport;
use crate::error::{Error, Result};
use crate::fault::FaultSurface;
use crate::fem::{FeModel, SimulationState};
use crate::record::FaultHistories;
use crate::run::Simulation;
use crate::scenario::Scenario;

const MAGIC: &str = "fesbi-array 1";

/// Snapshots queued for the writer thread before the stepper blocks.
pub const SNAPSHOT_QUEUE: usize = 4;

/// A named regular array of values.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldArray {
    pub field: String,
    /// `nodes`, `elements` or `samples`.
    pub location: String,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub step: u64,
    pub time: f64,
    pub values: Vec<f64>,
}

impl FieldArray {
    fn header(&self) -> String {
        let [n1, n2, n3] = self.dims;
        let [s1, s2, s3] = self.spacing;
        let [o1, o2, o3] = self.origin;
        format!(
            "{MAGIC}\nfield {}\nlocation {}\ndims {n1} {n2} {n3}\nspacing {s1:e} {s2:e} {s3:e}\norigin {o1:e} {o2:e} {o3:e}\nstep {}\ntime {:e}\nend\n",
            self.field, self.location, self.step, self.time
        )
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.header().as_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let bad = |what: &str| Error::Config(format!("{}: malformed array header ({what})", path.display()));
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim_end() != MAGIC {
            return Err(bad("magic"));
        }
        let mut out = FieldArray {
            field: String::new(),
            location: String::new(),
            dims: [0; 3],
            spacing: [0.0; 3],
            origin: [0.0; 3],
            step: 0,
            time: 0.0,
            values: Vec::new(),
        };
        loop {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(bad("missing end"));
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or("");
            let rest: Vec<&str> = parts.collect();
            let triple_f = |rest: &[&str]| -> Result<[f64; 3]> {
                let v: Vec<f64> = rest.iter().map(|s| s.parse().map_err(|_| bad(key))).collect::<Result<_>>()?;
                v.try_into().map_err(|_| bad(key))
            };
            match key {
                "end" => break,
                "field" => out.field = rest.join(" "),
                "location" => out.location = rest.join(" "),
                "dims" => {
                    let v: Vec<usize> = rest.iter().map(|s| s.parse().map_err(|_| bad("dims"))).collect::<Result<_>>()?;
                    out.dims = v.try_into().map_err(|_| bad("dims"))?;
                }
                "spacing" => out.spacing = triple_f(&rest)?,
                "origin" => out.origin = triple_f(&rest)?,
                "step" => out.step = rest.first().and_then(|s| s.parse().ok()).ok_or_else(|| bad("step"))?,
                "time" => out.time = rest.first().and_then(|s| s.parse().ok()).ok_or_else(|| bad("time"))?,
                _ => return Err(bad(key)),
            }
        }
        let n = out.dims.iter().product::<usize>();
        let mut bytes = Vec::with_capacity(8 * n);
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * n {
            return Err(bad("payload length"));
        }
        out.values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(out)
    }

    /// Legacy VTK structured-points export.
    pub fn write_vtk(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let [n1, n2, n3] = self.dims;
        let [s1, s2, s3] = self.spacing;
        let [o1, o2, o3] = self.origin;
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "{} step {} t={:e}", self.field, self.step, self.time)?;
        writeln!(w, "ASCII\nDATASET STRUCTURED_POINTS")?;
        if self.location == "elements" {
            writeln!(w, "DIMENSIONS {} {} {}", n1 + 1, n2 + 1, n3 + 1)?;
        } else {
            writeln!(w, "DIMENSIONS {n1} {n2} {n3}")?;
        }
        writeln!(w, "ORIGIN {o1:e} {o2:e} {o3:e}\nSPACING {s1:e} {s2:e} {s3:e}")?;
        let count = self.values.len();
        if self.location == "elements" {
            writeln!(w, "CELL_DATA {count}")?;
        } else {
            writeln!(w, "POINT_DATA {count}")?;
        }
        writeln!(w, "SCALARS {} double 1\nLOOKUP_TABLE default", self.field)?;
        for v in &self.values {
            writeln!(w, "{v:e}")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `|v|` on the lattice nodes (upper side at split planes).
pub fn velocity_snapshot(model: &FeModel, state: &SimulationState) -> FieldArray {
    let layout = model.layout();
    let grid = model.grid();
    let [n1, n3] = layout.plane_dims();
    let planes = layout.node_planes();
    let mut values = Vec::with_capacity(n1 * planes * n3);
    for k in 0..n3 {
        for j in 0..planes {
            for i in 0..n1 {
                let n = 3 * layout.node(i, j, k);
                values.push((state.v[n].powi(2) + state.v[n + 1].powi(2) + state.v[n + 2].powi(2)).sqrt());
            }
        }
    }
    FieldArray {
        field: "velocity_magnitude".into(),
        location: "nodes".into(),
        dims: [n1, planes, n3],
        spacing: [grid.dx(); 3],
        origin: grid.origin(),
        step: state.step,
        time: state.time,
        values,
    }
}

/// Change of `sigma_12` at the element centroids.
pub fn stress_snapshot(model: &FeModel, state: &SimulationState) -> FieldArray {
    let grid = model.grid();
    let [n1, n2, n3] = grid.n();
    let mut values = Vec::with_capacity(grid.element_count());
    for k in 0..n3 {
        for j in 0..n2 {
            for i in 0..n1 {
                values.push(model.element_stress(grid.element_index(i, j, k), &state.u)[5]);
            }
        }
    }
    let o = grid.origin();
    let h = 0.5 * grid.dx();
    FieldArray {
        field: "sigma12".into(),
        location: "elements".into(),
        dims: [n1, n2, n3],
        spacing: [grid.dx(); 3],
        origin: [o[0] + h, o[1] + h, o[2] + h],
        step: state.step,
        time: state.time,
        values,
    }
}

/// Slip rate along one row of fault nodes over time.
#[derive(Debug, Clone)]
pub struct SpaceTimeRecorder {
    nodes: Vec<usize>,
    x1_origin: f64,
    dx: f64,
    x3: f64,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SpaceTimeRecorder {
    /// Follows the row of `fault` nodes closest to `x3`, ordered by `x1`.
    pub fn new(fault: &FaultSurface, x3: f64, dx: f64) -> Self {
        let row_x3 = fault.coords(fault.nearest_node(fault.coords(0)[0], x3))[1];
        let mut nodes: Vec<usize> = (0..fault.len())
            .filter(|&i| (fault.coords(i)[1] - row_x3).abs() < 1e-6 * dx)
            .collect();
        nodes.sort_by(|&a, &b| fault.coords(a)[0].total_cmp(&fault.coords(b)[0]));
        let x1_origin = nodes.first().map_or(0.0, |&i| fault.coords(i)[0]);
        Self {
            nodes,
            x1_origin,
            dx,
            x3: row_x3,
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn record(&mut self, time: f64, fault: &FaultSurface) {
        self.times.push(time);
        let rate = fault.slip_rate();
        self.values.extend(self.nodes.iter().map(|&i| rate[i][0].hypot(rate[i][1])));
    }

    /// Array with `x1` along the first and time along the second dimension.
    pub fn to_array(&self) -> FieldArray {
        let dt = if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        };
        FieldArray {
            field: "slip_rate".into(),
            location: "samples".into(),
            dims: [self.nodes.len(), self.times.len(), 1],
            spacing: [self.dx, dt, 0.0],
            origin: [self.x1_origin, self.times.first().copied().unwrap_or(0.0), self.x3],
            step: 0,
            time: self.times.last().copied().unwrap_or(0.0),
            values: self.values.clone(),
        }
    }
}

enum Job {
    Write(Box<FieldArray>, PathBuf),
}

/// Writes snapshots on a background thread. The queue is bounded, so a slow
/// disk blocks [`submit`](Self::submit) instead of dropping snapshots.
pub struct SnapshotWriter {
    sender: Option<SyncSender<Job>>,
    handle: Option<JoinHandle<Result<()>>>,
    vtk: bool,
}

impl SnapshotWriter {
    pub fn new(vtk: bool) -> Self {
        let (sender, receiver) = sync_channel::<Job>(SNAPSHOT_QUEUE);
        let handle = std::thread::spawn(move || -> Result<()> {
            for job in receiver {
                let Job::Write(array, path) = job;
                array.write_binary(&path)?;
                if vtk {
                    array.write_vtk(&path.with_extension("vtk"))?;
                }
            }
            Ok(())
        });
        Self {
            sender: Some(sender),
            handle: Some(handle),
            vtk,
        }
    }

    pub fn writes_vtk(&self) -> bool {
        self.vtk
    }

    /// Queues `array` for writing to `path`.
    pub fn submit(&self, array: FieldArray, path: PathBuf) -> Result<()> {
        let sender = self.sender.as_ref().expect("writer is open until finish");
        if sender.send(Job::Write(Box::new(array), path)).is_err() {
            return Err(Error::Io(std::io::Error::other("snapshot writer stopped")));
        }
        Ok(())
    }

    /// Waits for every queued snapshot and reports the first write error.
    pub fn finish(mut self) -> Result<()> {
        self.close()
    }

    fn close(&mut self) -> Result<()> {
        self.sender.take();
        match self.handle.take() {
            Some(h) => h
                .join()
                .map_err(|_| Error::Io(std::io::Error::other("snapshot writer panicked")))?,
            None => Ok(()),
        }
    }
}

impl Drop for SnapshotWriter {
    fn drop(&mut self) {
        let _ = self.close();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub wall_seconds: f64,
    pub seconds_per_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSummary {
    pub ruptured_nodes: usize,
    pub max_slip: f64,
}

/// Everything needed to reproduce and interpret a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub scenario: Scenario,
    pub grid_elements: [usize; 3],
    pub dt: f64,
    pub steps: u64,
    pub threads: usize,
    pub snapshot_every: Option<u64>,
    pub rupture_threshold: f64,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
    pub faults: Vec<FaultSummary>,
    /// Absent for deterministic runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

/// Result of [`execute`].
#[derive(Debug)]
pub struct RunOutcome {
    pub histories: Vec<FaultHistories>,
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
}

fn relative(dir: &Path, path: &Path) -> String {
    path.strip_prefix(dir).unwrap_or(path).display().to_string()
}

/// Runs the configured scenario and writes its artifacts into the output
/// directory. `progress` sees every step.
pub fn execute(cfg: &RunConfig, mut progress: impl FnMut(&StepReport)) -> Result<RunOutcome> {
    let (scenario, _) = cfg.resolve()?;
    let mut sim = Simulation::new(&scenario)?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    let snap_dir = dir.join("snapshots");
    let cadence = cfg.output.cadence(sim.total_steps());
    if cadence.is_some() {
        std::fs::create_dir_all(&snap_dir)?;
    }
    let mut artifacts = Vec::new();
    let writer = SnapshotWriter::new(cfg.output.vtk);
    let mut spacetime: Vec<SpaceTimeRecorder> = sim
        .solver()
        .faults()
        .iter()
        .map(|f| SpaceTimeRecorder::new(f, 0.0, scenario.dx))
        .collect();
    let queue_snapshots = |sim: &Simulation, artifacts: &mut Vec<String>| -> Result<()> {
        let solver = sim.solver();
        let step = solver.state().step;
        for array in [
            velocity_snapshot(solver.model(), solver.state()),
            stress_snapshot(solver.model(), solver.state()),
        ] {
            let path = snap_dir.join(format!("{}_{step:06}.bin", array.field));
            artifacts.push(relative(&dir, &path));
            if writer.writes_vtk() {
                artifacts.push(relative(&dir, &path.with_extension("vtk")));
            }
            writer.submit(array, path)?;
        }
        Ok(())
    };
    if cadence.is_some() {
        queue_snapshots(&sim, &mut artifacts)?;
    }
    let start = Instant::now();
    while sim.solver().state().step < sim.total_steps() {
        let report = sim.step()?;
        for (rec, f) in spacetime.iter_mut().zip(sim.solver().faults()) {
            rec.record(report.time, f);
        }
        if let Some(c) = cadence {
            if report.step % c == 0 || report.step == sim.total_steps() {
                queue_snapshots(&sim, &mut artifacts)?;
            }
        }
        progress(&report);
    }
    let wall = start.elapsed().as_secs_f64();
    writer.finish()?;

    let steps = sim.total_steps();
    let dt = sim.dt();
    let warnings = sim.warnings().to_vec();
    let grid_elements = sim.solver().model().grid().n();
    let histories = sim.finish();
    let mut faults = Vec::new();
    for (f, (h, st)) in histories.iter().zip(&spacetime).enumerate() {
        for s in &h.stations {
            let path = dir.join(format!("fault{f}_station_{}.csv", s.station.name));
            s.write_csv(&path)?;
            artifacts.push(relative(&dir, &path));
        }
        let path = dir.join(format!("fault{f}_rupture.csv"));
        h.rupture.write_csv(&path)?;
        artifacts.push(relative(&dir, &path));
        let path = dir.join(format!("fault{f}_spacetime.bin"));
        st.to_array().write_binary(&path)?;
        artifacts.push(relative(&dir, &path));
        faults.push(FaultSummary {
            ruptured_nodes: h.rupture.ruptured_count(),
            max_slip: h.final_slip.iter().fold(0.0_f64, |m, s| m.max(s[0].hypot(s[1]))),
        });
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        scenario: scenario.clone(),
        grid_elements,
        dt,
        steps,
        threads: rayon::current_num_threads(),
        snapshot_every: cadence,
        rupture_threshold: scenario.rupture_threshold,
        warnings,
        artifacts,
        faults,
        timings: (!cfg.deterministic).then(|| Timings {
            wall_seconds: wall,
            seconds_per_step: wall / steps.max(1) as f64,
        }),
    };
    let manifest_path = dir.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunOutcome {
        histories,
        manifest,
        manifest_path,
    })
}

/// Sets the size of the global worker pool. Only the first call takes
/// effect; later calls report the size already in use.
pub fn configure_threads(threads: Option<usize>) -> usize {
    if let Some(n) = threads {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("worker pool already initialised; keeping {} threads", rayon::current_num_threads());
        }
    }
    rayon::current_num_threads()
}
