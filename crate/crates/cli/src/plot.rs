//! SVG figures drawn from run artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use contour::ContourBuilder;
use fesbi::output::FieldArray;
use plotters::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    /// Rupture-front contours from a rupture-time CSV.
    Rupture,
    /// Slip rate, shear stress and slip from a station CSV, or from every
    /// station CSV of a run directory.
    Stations,
    /// Slip rate against along-strike position and time.
    Spacetime,
    /// Step timings from a bench CSV.
    Scaling,
    /// Error against element size from a convergence CSV.
    Convergence,
}

impl PlotKind {
    fn label(self) -> &'static str {
        match self {
            PlotKind::Rupture => "rupture",
            PlotKind::Stations => "stations",
            PlotKind::Spacetime => "spacetime",
            PlotKind::Scaling => "scaling",
            PlotKind::Convergence => "convergence",
        }
    }
}

/// Failure while reading an artifact or rendering a figure.
#[derive(Debug)]
pub struct PlotError(pub String);

impl fmt::Display for PlotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for PlotError {}

fn plot_err(e: impl fmt::Display) -> PlotError {
    PlotError(e.to_string())
}

pub fn default_output(artifact: &Path, kind: PlotKind) -> PathBuf {
    let stem = artifact.file_stem().map_or_else(|| "plot".into(), |s| s.to_string_lossy().into_owned());
    let dir = if artifact.is_dir() {
        artifact.to_path_buf()
    } else {
        artifact.parent().map(Path::to_path_buf).unwrap_or_default()
    };
    dir.join(format!("{stem}_{}.svg", kind.label()))
}

pub fn draw(artifact: &Path, kind: PlotKind, out: &Path, interval: f64) -> Result<()> {
    match kind {
        PlotKind::Rupture => rupture(artifact, out, interval),
        PlotKind::Stations => stations(artifact, out),
        PlotKind::Spacetime => spacetime(artifact, out),
        PlotKind::Scaling => scaling(artifact, out),
        PlotKind::Convergence => convergence(artifact, out),
    }
    .with_context(|| format!("plotting {} as {}", artifact.display(), kind.label()))
}

/// Reads a CSV into named float columns; unparsable cells become NaN.
fn read_columns(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut cols: BTreeMap<String, Vec<f64>> = headers.iter().map(|h| (h.clone(), Vec::new())).collect();
    for rec in r.records() {
        let rec = rec?;
        for (h, v) in headers.iter().zip(rec.iter()) {
            cols.get_mut(h).expect("header").push(v.trim().parse().unwrap_or(f64::NAN));
        }
    }
    Ok(cols)
}

fn column<'a>(cols: &'a BTreeMap<String, Vec<f64>>, name: &str, path: &Path) -> Result<&'a [f64]> {
    cols.get(name)
        .map(Vec::as_slice)
        .ok_or_else(|| PlotError(format!("{} has no column '{name}'", path.display())).into())
}

fn range_of<'a>(values: impl IntoIterator<Item = &'a f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * hi.abs().max(1.0) {
        let pad = 0.5 * hi.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Rupture-front contours at multiples of `interval`.
fn rupture(path: &Path, out: &Path, interval: f64) -> Result<()> {
    if !(interval > 0.0) {
        return Err(PlotError("contour interval must be positive".into()).into());
    }
    let cols = read_columns(path)?;
    let x1 = column(&cols, "x1", path)?;
    let x3 = column(&cols, "x3", path)?;
    let t = column(&cols, "rupture_time", path)?;
    let key = |v: f64| (v * 1e3).round() as i64;
    let xs: Vec<i64> = {
        let mut v: Vec<i64> = x1.iter().map(|&x| key(x)).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let zs: Vec<i64> = {
        let mut v: Vec<i64> = x3.iter().map(|&x| key(x)).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let t_max = t.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let fill = if t_max.is_finite() { t_max + 2.0 * interval } else { 1.0 };
    let mut grid = vec![fill; xs.len() * zs.len()];
    for ((&a, &b), &tv) in x1.iter().zip(x3).zip(t) {
        let i = xs.binary_search(&key(a)).expect("collected above");
        let k = zs.binary_search(&key(b)).expect("collected above");
        if tv.is_finite() {
            grid[k * xs.len() + i] = tv;
        }
    }
    let km = |v: i64| v as f64 / 1e6;
    let (xr, zr) = if xs.is_empty() {
        ((0.0, 1.0), (0.0, 1.0))
    } else {
        ((km(xs[0]), km(*xs.last().expect("non-empty"))), (km(zs[0]), km(*zs.last().expect("non-empty"))))
    };
    let root = SVGBackend::new(out, (900, 520)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("Rupture front every {interval} s"), ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(xr.0..xr.1.max(xr.0 + 1e-3), zr.0..zr.1.max(zr.0 + 1e-3))
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("x1 (km)")
        .y_desc("x3 (km)")
        .draw()
        .map_err(plot_err)?;
    if t_max.is_finite() && xs.len() > 1 && zs.len() > 1 {
        let levels: Vec<f64> = (1..).map(|n| n as f64 * interval).take_while(|&l| l <= t_max).collect();
        let dx = km(xs[1] - xs[0]);
        let dz = km(zs[1] - zs[0]);
        // The contour grid treats each value as a unit cell, so shift by
        // half a cell to put values on the node positions.
        let builder = ContourBuilder::new(xs.len(), zs.len(), false)
            .x_origin(km(xs[0]) - 0.5 * dx)
            .y_origin(km(zs[0]) - 0.5 * dz)
            .x_step(dx)
            .y_step(dz);
        let lines = builder.lines(&grid, &levels).map_err(plot_err)?;
        for (n, line) in lines.iter().enumerate() {
            let color = Palette99::pick(n).to_rgba();
            for ls in &line.geometry().0 {
                let pts: Vec<(f64, f64)> = ls.0.iter().map(|c| (c.x, c.y)).collect();
                chart.draw_series(LineSeries::new(pts, color.stroke_width(2))).map_err(plot_err)?;
            }
        }
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

fn station_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.contains("_station_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(PlotError(format!("{} holds no station CSV files", path.display())).into());
    }
    Ok(files)
}

/// One row of panels per station: slip rate, shear stress and slip.
fn stations(path: &Path, out: &Path) -> Result<()> {
    let files = station_files(path)?;
    let root = SVGBackend::new(out, (1200, 260 * files.len() as u32)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let rows = root.split_evenly((files.len(), 3));
    for (r, file) in files.iter().enumerate() {
        let cols = read_columns(file)?;
        let time = column(&cols, "time", file)?;
        let name = file.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let mpa: Vec<f64> = column(&cols, "sigma12", file)?.iter().map(|v| v / 1e6).collect();
        let panels: [(&str, Vec<f64>); 3] = [
            ("slip rate (m/s)", column(&cols, "slip_rate1", file)?.to_vec()),
            ("shear stress (MPa)", mpa),
            ("slip (m)", column(&cols, "slip1", file)?.to_vec()),
        ];
        for (c, (label, y)) in panels.iter().enumerate() {
            let area = &rows[3 * r + c];
            let (t0, t1) = range_of(time);
            let (y0, y1) = range_of(y);
            let mut chart = ChartBuilder::on(area)
                .caption(format!("{name}: {label}"), ("sans-serif", 14))
                .margin(8)
                .x_label_area_size(30)
                .y_label_area_size(50)
                .build_cartesian_2d(t0..t1, y0..y1)
                .map_err(plot_err)?;
            chart.configure_mesh().x_desc("t (s)").draw().map_err(plot_err)?;
            chart
                .draw_series(LineSeries::new(time.iter().copied().zip(y.iter().copied()), &BLUE))
                .map_err(plot_err)?;
        }
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

fn heat(f: f64) -> RGBColor {
    let f = f.clamp(0.0, 1.0);
    let hsl = HSLColor(0.66 * (1.0 - f), 0.9, 0.15 + 0.45 * f.sqrt());
    let (r, g, b) = hsl.to_rgba().rgb();
    RGBColor(r, g, b)
}

/// Slip rate as a colour map over along-strike position and time.
fn spacetime(path: &Path, out: &Path) -> Result<()> {
    let a = FieldArray::read_binary(path)?;
    let [nx, nt, _] = a.dims;
    let root = SVGBackend::new(out, (900, 620)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let x0 = a.origin[0] / 1e3;
    let x1 = x0 + a.spacing[0] * nx.max(1) as f64 / 1e3;
    let t0 = a.origin[1];
    let t1 = t0 + a.spacing[1].max(1e-9) * nt.max(1) as f64;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("Slip rate along x3 = {:.1} km", a.origin[2] / 1e3), ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(x0..x1, t0..t1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("x1 (km)")
        .y_desc("t (s)")
        .draw()
        .map_err(plot_err)?;
    let vmax = a.values.iter().fold(0.0_f64, |m, v| m.max(*v));
    if nx > 0 && nt > 0 && vmax > 0.0 {
        let bx = nx.div_ceil(300);
        let bt = nt.div_ceil(300);
        let mut cells = Vec::new();
        for it in (0..nt).step_by(bt) {
            for ix in (0..nx).step_by(bx) {
                let mut v: f64 = 0.0;
                for t in it..(it + bt).min(nt) {
                    for x in ix..(ix + bx).min(nx) {
                        v = v.max(a.values[t * nx + x]);
                    }
                }
                let xa = x0 + a.spacing[0] * ix as f64 / 1e3;
                let ta = t0 + a.spacing[1] * it as f64;
                let xb = xa + a.spacing[0] * bx as f64 / 1e3;
                let tb = ta + a.spacing[1] * bt as f64;
                cells.push(Rectangle::new([(xa, ta), (xb, tb)], heat(v / vmax).filled()));
            }
        }
        chart.draw_series(cells).map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

fn log_range(values: &[f64]) -> (f64, f64) {
    let positive: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0 && v.is_finite()).collect();
    if positive.is_empty() {
        return (0.1, 10.0);
    }
    let lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = positive.iter().copied().fold(0.0, f64::max);
    (lo / 1.5, hi * 1.5)
}

/// FE step time against strip depth and step times against plane size.
fn scaling(path: &Path, out: &Path) -> Result<()> {
    let mut r = csv::Reader::from_path(path)?;
    let mut depth: Vec<(f64, f64)> = Vec::new();
    let mut fe_plane: BTreeMap<usize, f64> = BTreeMap::new();
    let mut sbi: Vec<(f64, f64)> = Vec::new();
    let mut layer: Vec<(f64, f64)> = Vec::new();
    let mut first_plane = None;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| rec.get(i).and_then(|v| v.parse::<f64>().ok()).unwrap_or(f64::NAN);
        rows.push((rec.get(0).unwrap_or("").to_string(), num(1), num(2), num(3), num(4), num(5)));
    }
    let min_depth = rows
        .iter()
        .filter(|r| r.0 == "fe")
        .map(|r| r.2)
        .fold(f64::INFINITY, f64::min);
    for (kind, n1, n2, n3, s, l) in rows {
        let plane = n1 * n3;
        if kind == "fe" {
            let fp = *first_plane.get_or_insert(plane);
            if plane == fp && !depth.iter().any(|d| d.0 == n2) {
                depth.push((n2, s));
            }
            if n2 == min_depth {
                fe_plane.insert(plane as usize, s);
            }
        } else if kind == "sbi" {
            sbi.push((plane, s));
            layer.push((plane, l));
        }
    }
    depth.sort_by(|a, b| a.0.total_cmp(&b.0));
    let root = SVGBackend::new(out, (1200, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let (left, right) = root.split_horizontally(600);

    let (d0, d1) = range_of(depth.iter().map(|d| &d.0));
    let (s0, s1) = range_of(depth.iter().map(|d| &d.1));
    let mut chart = ChartBuilder::on(&left)
        .caption("FE step time against N2", ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(d0.min(0.0)..d1, s0.min(0.0)..s1)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("N2").y_desc("s / step").draw().map_err(plot_err)?;
    chart.draw_series(LineSeries::new(depth.clone(), &BLUE)).map_err(plot_err)?;
    chart
        .draw_series(depth.iter().map(|&p| Circle::new(p, 4, BLUE.filled())))
        .map_err(plot_err)?;

    let planes: Vec<f64> = sbi.iter().map(|p| p.0).chain(fe_plane.keys().map(|&k| k as f64)).collect();
    let times: Vec<f64> = sbi
        .iter()
        .map(|p| p.1)
        .chain(fe_plane.values().copied())
        .chain(layer.iter().map(|p| p.1))
        .collect();
    let (p0, p1) = log_range(&planes);
    let (t0, t1) = log_range(&times);
    let mut chart = ChartBuilder::on(&right)
        .caption("Step time against N1 N3", ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d((p0..p1).log_scale(), (t0..t1).log_scale())
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("N1 N3").y_desc("s / step").draw().map_err(plot_err)?;
    let fe: Vec<(f64, f64)> = fe_plane.iter().map(|(&k, &v)| (k as f64, v)).collect();
    for (series, color, label) in [(fe, BLUE, "FE strip"), (sbi, RED, "boundary integral"), (layer, GREEN, "one FE layer")] {
        let series: Vec<(f64, f64)> = series.into_iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).collect();
        chart
            .draw_series(LineSeries::new(series.clone(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        chart
            .draw_series(series.iter().map(|&p| Circle::new(p, 4, color.filled())))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Relative L2 error against element size on log axes, or the station
/// error history when given an error trace table.
fn convergence(path: &Path, out: &Path) -> Result<()> {
    let cols = read_columns(path)?;
    if cols.contains_key("abs_slip_error") {
        return error_trace(path, &cols, out);
    }
    let dx = column(&cols, "dx", path)?;
    let err = column(&cols, "relative_l2_error", path)?;
    let pts: Vec<(f64, f64)> = dx
        .iter()
        .zip(err)
        .map(|(&a, &b)| (a, b))
        .filter(|p| p.0 > 0.0 && p.1 > 0.0)
        .collect();
    let (x0, x1) = log_range(dx);
    let (y0, y1) = log_range(err);
    let root = SVGBackend::new(out, (700, 520)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Slip error against element size", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale())
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("dx (m)")
        .y_desc("relative L2 error")
        .draw()
        .map_err(plot_err)?;
    chart.draw_series(LineSeries::new(pts.clone(), &BLUE)).map_err(plot_err)?;
    chart
        .draw_series(pts.iter().map(|&p| Circle::new(p, 4, BLUE.filled())))
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Absolute station slip error against time.
fn error_trace(path: &Path, cols: &BTreeMap<String, Vec<f64>>, out: &Path) -> Result<()> {
    let t = column(cols, "time", path)?;
    let err = column(cols, "abs_slip_error", path)?;
    let (t0, t1) = range_of(t);
    let (_, e1) = range_of(err);
    let root = SVGBackend::new(out, (700, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Station slip error", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(t0..t1, 0.0..e1.max(1e-12) * 1.05)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("time (s)")
        .y_desc("absolute slip error (m)")
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new(t.iter().copied().zip(err.iter().copied()), &BLUE))
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}
