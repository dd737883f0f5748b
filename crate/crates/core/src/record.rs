//! Fault recordings: station time series, rupture-time maps and the error
//! measures used to compare runs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slip-rate magnitude (m/s) that marks the arrival of the rupture front.
pub const RUPTURE_THRESHOLD: f64 = 1e-3;

/// On-fault recording location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Station {
    pub name: String,
    pub x1: f64,
    pub x3: f64,
    /// Index of the fault the station sits on.
    #[serde(default)]
    pub fault: usize,
}

impl Station {
    pub fn new(name: impl Into<String>, x1: f64, x3: f64) -> Self {
        Self {
            name: name.into(),
            x1,
            x3,
            fault: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSeries {
    pub station: Station,
    /// Fault node the station was snapped to.
    pub node: usize,
    pub time: Vec<f64>,
    pub slip: Vec<[f64; 2]>,
    pub slip_rate: Vec<[f64; 2]>,
    pub traction: Vec<[f64; 2]>,
    /// Normal stress, compression positive.
    pub normal_stress: Vec<f64>,
}

impl StationSeries {
    /// Slip rate along `x1`.
    pub fn slip_rate_strike(&self) -> Vec<f64> {
        self.slip_rate.iter().map(|v| v[0]).collect()
    }

    /// Shear traction along `x1`.
    pub fn shear_stress(&self) -> Vec<f64> {
        self.traction.iter().map(|t| t[0]).collect()
    }

    pub fn slip_strike(&self) -> Vec<f64> {
        self.slip.iter().map(|s| s[0]).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "time",
            "slip1",
            "slip3",
            "slip_rate1",
            "slip_rate3",
            "sigma12",
            "sigma32",
            "sigma22",
        ])?;
        for n in 0..self.time.len() {
            let s = self.slip[n];
            let v = self.slip_rate[n];
            let t = self.traction[n];
            w.write_record(
                [self.time[n], s[0], s[1], v[0], v[1], t[0], t[1], -self.normal_stress[n]]
                    .iter()
                    .map(|x| format!("{x:.9e}")),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// First time each fault node exceeded the rupture threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuptureMap {
    pub coords: Vec<[f64; 2]>,
    pub times: Vec<Option<f64>>,
    /// Slip-rate threshold the times refer to (m/s).
    pub threshold: f64,
}

impl RuptureMap {
    pub fn new(coords: Vec<[f64; 2]>) -> Self {
        let n = coords.len();
        Self {
            coords,
            times: vec![None; n],
            threshold: RUPTURE_THRESHOLD,
        }
    }

    pub fn ruptured_count(&self) -> usize {
        self.times.iter().filter(|t| t.is_some()).count()
    }

    pub fn time_near(&self, x1: f64, x3: f64) -> Option<f64> {
        let i = nearest(&self.coords, x1, x3)?;
        self.times[i]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x1", "x3", "rupture_time"])?;
        for (x, t) in self.coords.iter().zip(&self.times) {
            let t = t.map_or_else(|| "nan".to_string(), |t| format!("{t:.9e}"));
            w.write_record([format!("{:.6}", x[0]), format!("{:.6}", x[1]), t])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn nearest(coords: &[[f64; 2]], x1: f64, x3: f64) -> Option<usize> {
    coords
        .iter()
        .enumerate()
        .map(|(i, c)| (i, (c[0] - x1).hypot(c[1] - x3)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

/// Everything recorded on one fault during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultHistories {
    pub stations: Vec<StationSeries>,
    pub rupture: RuptureMap,
    pub final_slip: Vec<[f64; 2]>,
}

impl FaultHistories {
    pub fn station(&self, name: &str) -> Option<&StationSeries> {
        self.stations.iter().find(|s| s.station.name == name)
    }
}

/// Accumulates station series and rupture times for one fault.
#[derive(Debug, Clone)]
pub struct FaultRecorder {
    stations: Vec<StationSeries>,
    rupture: RuptureMap,
    threshold: f64,
}

impl FaultRecorder {
    /// Snaps each station to the nearest fault node; stations farther than
    /// `tolerance` from every node are rejected.
    pub fn new(stations: &[Station], coords: Vec<[f64; 2]>, tolerance: f64) -> Result<Self> {
        let mut series = Vec::with_capacity(stations.len());
        for st in stations {
            let node = nearest(&coords, st.x1, st.x3)
                .filter(|&i| (coords[i][0] - st.x1).hypot(coords[i][1] - st.x3) <= tolerance)
                .ok_or_else(|| {
                    Error::Config(format!("station {} at ({}, {}) is not on the fault", st.name, st.x1, st.x3))
                })?;
            series.push(StationSeries {
                station: st.clone(),
                node,
                time: Vec::new(),
                slip: Vec::new(),
                slip_rate: Vec::new(),
                traction: Vec::new(),
                normal_stress: Vec::new(),
            });
        }
        Ok(Self {
            stations: series,
            rupture: RuptureMap::new(coords),
            threshold: RUPTURE_THRESHOLD,
        })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self.rupture.threshold = threshold;
        self
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn rupture(&self) -> &RuptureMap {
        &self.rupture
    }

    pub fn record(
        &mut self,
        time: f64,
        slip: &[[f64; 2]],
        slip_rate: &[[f64; 2]],
        traction: &[[f64; 2]],
        normal_stress: &[f64],
    ) {
        for s in &mut self.stations {
            s.time.push(time);
            s.slip.push(slip[s.node]);
            s.slip_rate.push(slip_rate[s.node]);
            s.traction.push(traction[s.node]);
            s.normal_stress.push(normal_stress[s.node]);
        }
        for (t, v) in self.rupture.times.iter_mut().zip(slip_rate) {
            if t.is_none() && v[0].hypot(v[1]) > self.threshold {
                *t = Some(time);
            }
        }
    }

    pub fn finish(self, final_slip: Vec<[f64; 2]>) -> FaultHistories {
        FaultHistories {
            stations: self.stations,
            rupture: self.rupture,
            final_slip,
        }
    }
}

/// Linear interpolation of `(t, y)` at `at`, clamped to the end values.
pub fn interpolate(t: &[f64], y: &[f64], at: f64) -> f64 {
    if t.is_empty() {
        return 0.0;
    }
    if at <= t[0] {
        return y[0];
    }
    let last = t.len() - 1;
    if at >= t[last] {
        return y[last];
    }
    let j = t.partition_point(|&x| x <= at);
    let (t0, t1) = (t[j - 1], t[j]);
    let w = (at - t0) / (t1 - t0);
    y[j - 1] * (1.0 - w) + y[j] * w
}

/// RMS of `test - reference` over the reference samples, divided by the
/// reference peak magnitude. `test` is interpolated onto the reference times.
pub fn rms_relative(t_ref: &[f64], reference: &[f64], t_test: &[f64], test: &[f64]) -> f64 {
    let peak = reference.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if reference.is_empty() || peak == 0.0 {
        return 0.0;
    }
    let sum: f64 = t_ref
        .iter()
        .zip(reference)
        .map(|(&t, &r)| (interpolate(t_test, test, t) - r).powi(2))
        .sum();
    (sum / reference.len() as f64).sqrt() / peak
}

/// Time-domain L2 norm `sqrt(sum y^2 dt)` of `test - reference`.
pub fn l2_error(t_ref: &[f64], reference: &[f64], t_test: &[f64], test: &[f64]) -> f64 {
    if t_ref.len() < 2 {
        return 0.0;
    }
    let dt = t_ref[1] - t_ref[0];
    let sum: f64 = t_ref
        .iter()
        .zip(reference)
        .map(|(&t, &r)| (interpolate(t_test, test, t) - r).powi(2))
        .sum();
    (sum * dt).sqrt()
}
