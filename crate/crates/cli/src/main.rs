//! `fesbi` command-line driver.
//!
//! Exit codes: 0 success, 2 usage error, 3 invalid configuration or
//! scenario, 4 numerical instability, 5 file system or format failure,
//! 1 anything else.

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use fesbi::config::RunConfig;
use fesbi::harness::bench::{bench, BenchSettings};
use fesbi::harness::converge::converge;
use fesbi::output::{configure_threads, execute};

use crate::plot::PlotKind;

const EXIT_VALIDATION: u8 = 3;
const EXIT_UNSTABLE: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "fesbi", version, about = "Hybrid FE / boundary-integral dynamic rupture simulations")]
struct Cli {
    /// Upper bound on worker threads.
    #[arg(long, env = "FESBI_THREADS", global = true)]
    max_threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a configured scenario and write its artifacts.
    Run {
        config: PathBuf,
        /// Print the resolved scenario as TOML and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Grid convergence study of a preset.
    Converge {
        config: PathBuf,
        /// Coarse element sizes (m).
        #[arg(long = "dx", required = true, num_args = 1.., value_delimiter = ',')]
        dx: Vec<f64>,
        /// Reference element size (m); must be the finest.
        #[arg(long)]
        reference: f64,
        /// Comparison time (s).
        #[arg(long, default_value_t = 3.0)]
        time: f64,
        /// Station whose slip error history is written.
        #[arg(long)]
        station: Option<String>,
    },
    /// Time FE and boundary-integral steps.
    Bench {
        /// Plane sizes as N1xN3.
        #[arg(long, value_delimiter = ',', default_value = "64x32,128x64,256x128")]
        planes: Vec<String>,
        /// Strip depths N2.
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        depths: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        warmup: usize,
        #[arg(long, default_value_t = 15)]
        measure: usize,
        /// CSV file receiving the timings.
        #[arg(long, default_value = "bench.csv")]
        out: PathBuf,
    },
    /// Draw a figure from a run artifact.
    Plot {
        artifact: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Output SVG; defaults to the artifact name with the kind appended.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Contour spacing for rupture plots (s).
        #[arg(long, default_value_t = 0.5)]
        interval: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<fesbi::Error>() {
            use fesbi::Error::*;
            return match err {
                Unstable { .. } | NonFinite { .. } => EXIT_UNSTABLE,
                Io(_) | Csv(_) | Json(_) => EXIT_IO,
                _ => EXIT_VALIDATION,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<csv::Error>().is_some() {
            return EXIT_IO;
        }
        if cause.downcast_ref::<plot::PlotError>().is_some() {
            return EXIT_IO;
        }
    }
    1
}

fn thread_count(requested: Option<usize>, cap: Option<usize>) -> Option<usize> {
    match (requested, cap) {
        (Some(r), Some(c)) => Some(r.min(c).max(1)),
        (Some(r), None) => Some(r),
        (None, Some(c)) => Some(c.max(1)),
        (None, None) => None,
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    RunConfig::load(path).with_context(|| format!("reading config {}", path.display()))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, dry_run } => {
            let cfg = load(&config)?;
            let (scenario, warnings) = cfg.resolve()?;
            for w in &warnings {
                log::warn!("{w}");
            }
            if dry_run {
                let mut explicit = cfg.clone();
                explicit.preset = None;
                explicit.scenario = Some(scenario);
                print!("{}", explicit.to_toml()?);
                return Ok(());
            }
            let threads = configure_threads(thread_count(cfg.threads, cli.max_threads));
            let steps = scenario.steps()?;
            log::info!("{}: {steps} steps on {threads} threads", scenario.name);
            let every = (steps / 20).max(1);
            let outcome = execute(&cfg, |r| {
                if r.step % every == 0 {
                    log::info!(
                        "step {}/{steps} t = {:.3} s  max slip rate {:.3} m/s  rupture extent {:.1} km",
                        r.step,
                        r.time,
                        r.max_slip_rate,
                        r.rupture_extent / 1000.0
                    );
                }
            })?;
            for (i, f) in outcome.manifest.faults.iter().enumerate() {
                println!("fault {i}: {} nodes ruptured, max slip {:.3} m", f.ruptured_nodes, f.max_slip);
            }
            println!("manifest: {}", outcome.manifest_path.display());
            Ok(())
        }
        Command::Converge {
            config,
            dx,
            reference,
            time,
            station,
        } => {
            let cfg = load(&config)?;
            let Some(selection) = cfg.preset.clone() else {
                return Err(fesbi::Error::Config("convergence studies need a [preset] config".into()).into());
            };
            configure_threads(thread_count(cfg.threads, cli.max_threads));
            let report = converge(
                |h| {
                    let mut s = selection.clone();
                    s.dx = h;
                    s.build()
                },
                &dx,
                reference,
                time,
                station.as_deref(),
            )?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            report.write_csv(&cfg.output_dir.join("convergence.csv"))?;
            std::fs::write(cfg.output_dir.join("convergence.json"), serde_json::to_string_pretty(&report)?)?;
            for trace in &report.traces {
                let path = cfg.output_dir.join(format!("error_trace_{}_dx{}.csv", trace.station, trace.dx));
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["time", "abs_slip_error", "slip", "reference_slip"])?;
                for (i, t) in trace.time.iter().enumerate() {
                    w.write_record([
                        format!("{t:.9e}"),
                        format!("{:.9e}", trace.error[i]),
                        format!("{:.9e}", trace.slip[i]),
                        format!("{:.9e}", trace.reference_slip[i]),
                    ])?;
                }
                w.flush()?;
            }
            for r in &report.rows {
                println!("dx = {:>8.1} m  relative L2 error {:.4e}", r.dx, r.error);
            }
            if report.rows.len() > 1 {
                println!("slope {:.3}", report.slope);
            } else {
                println!("slope undefined with a single coarse grid");
            }
            Ok(())
        }
        Command::Bench {
            planes,
            depths,
            warmup,
            measure,
            out,
        } => {
            configure_threads(thread_count(None, cli.max_threads));
            let planes = planes.iter().map(|p| parse_plane(p)).collect::<Result<Vec<_>>>()?;
            let settings = BenchSettings {
                warmup,
                measure,
                ..BenchSettings::default()
            };
            let report = bench(&planes, &depths, &settings)?;
            report.write_csv(&out)?;
            for r in &report.fe_depth {
                println!("FE  {}x{}x{}: {:.3e} s/step", r.n1, r.n2, r.n3, r.seconds);
            }
            println!("FE linear fit in N2: R^2 = {:.4}", report.fe_depth_r2);
            for r in &report.sbi {
                println!(
                    "SBI {}x{}: {:.3e} s/step, {:.2}x one FE layer",
                    r.n1,
                    r.n3,
                    r.seconds,
                    r.ratio_to_layer()
                );
            }
            println!(
                "exponents in N1N3: FE {:.2}, SBI {:.2}",
                report.fe_plane_exponent, report.sbi_plane_exponent
            );
            println!("timings: {}", out.display());
            Ok(())
        }
        Command::Plot {
            artifact,
            kind,
            out,
            interval,
        } => {
            if !artifact.exists() {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("artifact {} does not exist", artifact.display()),
                )
                .into());
            }
            let out = out.unwrap_or_else(|| plot::default_output(&artifact, kind));
            plot::draw(&artifact, kind, &out, interval)?;
            println!("{}", out.display());
            Ok(())
        }
    }
}

fn parse_plane(s: &str) -> Result<(usize, usize)> {
    let Some((a, b)) = s.split_once('x') else {
        bail!(fesbi::Error::Config(format!("plane size '{s}' is not of the form N1xN3")));
    };
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| fesbi::Error::Config(format!("plane size '{s}' is not of the form N1xN3")))
    };
    Ok((parse(a)?, parse(b)?))
}
