//! Scenario descriptions and the preset experiments.
//!
//! A scenario fixes the strip geometry, materials, faults, stations and run
//! length. Presets keep every physical parameter of their experiment and only
//! take the element size (and, where it matters, the strip width) as input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fault::{FaultPatch, FaultSpec, FrictionPatch, Nucleation, NucleationMechanism, SlipWeakening};
use crate::fem::{cfl_timestep, DEFAULT_CFL_SAFETY};
use crate::material::{ElasticMaterial, MaterialSpec};
use crate::mesh::{is_spectral_size, RegionSpec};
use crate::record::{Station, RUPTURE_THRESHOLD};
use crate::sbi::boundary::SbiSettings;

/// Axis-aligned extent of the strip (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub x1: [f64; 2],
    pub x2: [f64; 2],
    pub x3: [f64; 2],
}

impl Domain {
    pub fn extents(&self) -> [f64; 3] {
        [self.x1[1] - self.x1[0], self.x2[1] - self.x2[0], self.x3[1] - self.x3[0]]
    }

    pub fn origin(&self) -> [f64; 3] {
        [self.x1[0], self.x2[0], self.x3[0]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeStepPolicy {
    /// `dt = safety * dx / max(cp)`.
    Cfl { safety: f64 },
    /// Fixed step; must satisfy the CFL bound with safety 1.
    Fixed { dt: f64 },
}

impl Default for TimeStepPolicy {
    fn default() -> Self {
        TimeStepPolicy::Cfl {
            safety: DEFAULT_CFL_SAFETY,
        }
    }
}

fn default_threshold() -> f64 {
    RUPTURE_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub dx: f64,
    pub domain: Domain,
    /// Mirror-symmetric formulation: the model holds only `x2 >= 0` and the
    /// single fault lies on its bottom plane.
    pub symmetric: bool,
    /// Material 0 fills every element not claimed by a region.
    pub materials: Vec<MaterialSpec>,
    #[serde(default)]
    pub regions: Vec<RegionSpec>,
    pub faults: Vec<FaultSpec>,
    #[serde(default)]
    pub stations: Vec<Station>,
    /// Simulated time (s).
    pub duration: f64,
    #[serde(default)]
    pub time_step: TimeStepPolicy,
    #[serde(default)]
    pub sbi: SbiSettings,
    /// Slip rate (m/s) defining rupture arrival.
    #[serde(default = "default_threshold")]
    pub rupture_threshold: f64,
}

fn divides(length: f64, dx: f64) -> bool {
    let r = length / dx;
    (r - r.round()).abs() <= 1e-9 * r.abs().max(1.0)
}

impl Scenario {
    pub fn built_materials(&self) -> Result<Vec<ElasticMaterial>> {
        self.materials.iter().map(MaterialSpec::build).collect()
    }

    /// Element counts along the three axes.
    pub fn grid_dims(&self) -> Result<[usize; 3]> {
        let ext = self.domain.extents();
        let mut n = [0; 3];
        for a in 0..3 {
            if !(ext[a] > 0.0) || !divides(ext[a], self.dx) {
                return Err(Error::Config(format!(
                    "extent {} along x{} is not a positive multiple of dx = {}",
                    ext[a],
                    a + 1,
                    self.dx
                )));
            }
            n[a] = (ext[a] / self.dx).round() as usize;
        }
        Ok(n)
    }

    pub fn time_step(&self) -> Result<f64> {
        let materials = self.built_materials()?;
        match self.time_step {
            TimeStepPolicy::Cfl { safety } => cfl_timestep(self.dx, &materials, safety),
            TimeStepPolicy::Fixed { dt } => {
                let limit = cfl_timestep(self.dx, &materials, 1.0)?;
                if !(dt > 0.0 && dt <= limit) {
                    return Err(Error::TimeStep(format!("fixed dt = {dt} violates the CFL limit {limit}")));
                }
                Ok(dt)
            }
        }
    }

    pub fn steps(&self) -> Result<u64> {
        let dt = self.time_step()?;
        Ok((self.duration / dt - 1e-9).ceil().max(0.0) as u64)
    }

    /// Checks the scenario before anything is allocated. Returns advisory
    /// warnings; hard problems are errors.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::Config(format!("dx must be positive, got {}", self.dx)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration must be positive, got {}", self.duration)));
        }
        if !(self.rupture_threshold > 0.0) {
            return Err(Error::Config("rupture threshold must be positive".into()));
        }
        let n = self.grid_dims()?;
        for a in [0, 2] {
            if !is_spectral_size(n[a]) {
                return Err(Error::Config(format!(
                    "{} elements along x{} is not a product of 2, 3 and 5",
                    n[a],
                    a + 1
                )));
            }
        }
        if self.materials.is_empty() {
            return Err(Error::Config("at least one material is required".into()));
        }
        let materials = self.built_materials()?;
        for (i, r) in self.regions.iter().enumerate() {
            if r.material >= materials.len() {
                return Err(Error::Config(format!("region {i} uses undefined material {}", r.material)));
            }
        }
        self.time_step()?;
        if self.faults.is_empty() {
            return Err(Error::Config("at least one fault is required".into()));
        }
        if self.symmetric {
            if self.faults.len() != 1 {
                return Err(Error::Config("the symmetric formulation supports exactly one fault".into()));
            }
            if (self.faults[0].x2 - self.domain.x2[0]).abs() > 1e-6 * self.dx {
                return Err(Error::Config("a symmetric fault must lie on the bottom plane of the strip".into()));
            }
        }
        for (f, fault) in self.faults.iter().enumerate() {
            fault.validate()?;
            let r = (fault.x2 - self.domain.x2[0]) / self.dx;
            let interior = r > 0.5 && r < n[1] as f64 - 0.5;
            if (r - r.round()).abs() > 1e-6 || !(interior || self.symmetric) {
                return Err(Error::Config(format!(
                    "fault {f} at x2 = {} is not an interior node plane",
                    fault.x2
                )));
            }
            if let Some(nuc) = &fault.nucleation {
                if let NucleationMechanism::StressStep { shear } = nuc.mechanism {
                    if shear <= fault.friction.mu_s * fault.sigma0 {
                        return Err(Error::Config(format!(
                            "fault {f}: nucleation stress {shear} does not exceed the static strength {}",
                            fault.friction.mu_s * fault.sigma0
                        )));
                    }
                }
            }
            let period = [self.domain.extents()[0], self.domain.extents()[2]];
            let size = [fault.rupture.max[0] - fault.rupture.min[0], fault.rupture.max[1] - fault.rupture.min[1]];
            let margin = (period[0] - size[0]).min(period[1] - size[1]).max(0.0);
            let cp = materials.iter().map(ElasticMaterial::cp).fold(0.0, f64::max);
            if self.duration * cp > margin {
                warnings.push(format!(
                    "fault {f}: P waves travel {:.0} m within the run but the periodic margin is {:.0} m; \
                     wrapped arrivals may reach the rupture",
                    self.duration * cp,
                    margin
                ));
            }
        }
        for s in &self.stations {
            let fault = self
                .faults
                .get(s.fault)
                .ok_or_else(|| Error::Config(format!("station {} refers to fault {}", s.name, s.fault)))?;
            if !fault.rupture.contains(s.x1, s.x3, 0.5 * self.dx) {
                return Err(Error::Config(format!("station {} lies outside the rupture region", s.name)));
            }
        }
        Ok(warnings)
    }
}

fn host() -> MaterialSpec {
    MaterialSpec {
        density: 2670.0,
        cp: 6000.0,
        cs: 3464.0,
    }
}

fn reduced_host() -> MaterialSpec {
    let h = host();
    MaterialSpec {
        density: h.density,
        cp: 0.8 * h.cp,
        cs: 0.8 * h.cs,
    }
}

/// Smallest multiple of `dx` that is at least `length`.
fn round_up(length: f64, dx: f64) -> f64 {
    (length / dx - 1e-9).ceil() * dx
}

fn require_multiple(length: f64, dx: f64, what: &str) -> Result<()> {
    if divides(length, dx) {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} ({length} m) is not a multiple of dx = {dx} m")))
    }
}

/// SCEC TPV3 benchmark on a 40 km x 20 km periodic fault plane. `l2` is the
/// full strip width; the symmetric model holds half of it.
pub fn tpv3(dx: f64, l2: f64) -> Result<Scenario> {
    require_multiple(0.5 * l2, dx, "half strip width")?;
    require_multiple(20_000.0, dx, "fault plane size")?;
    let half = 1500.0;
    Ok(Scenario {
        name: "tpv3".into(),
        dx,
        domain: Domain {
            x1: [-20_000.0, 20_000.0],
            x2: [0.0, 0.5 * l2],
            x3: [-10_000.0, 10_000.0],
        },
        symmetric: true,
        materials: vec![host()],
        regions: Vec::new(),
        faults: vec![FaultSpec {
            x2: 0.0,
            rupture: FaultPatch::centered(0.0, 0.0, 30_000.0, 15_000.0),
            friction: SlipWeakening {
                mu_s: 0.677,
                mu_k: 0.525,
                dc: 0.4,
            },
            tau0: 70e6,
            tau0_dip: 0.0,
            sigma0: 120e6,
            friction_patches: Vec::new(),
            nucleation: Some(Nucleation {
                patch: FaultPatch {
                    min: [-half, -half],
                    max: [half, half],
                },
                mechanism: NucleationMechanism::StressStep { shear: 81.6e6 },
                onset: 0.0,
            }),
        }],
        stations: vec![
            Station::new("A", 0.0, 3000.0),
            Station::new("B", 4500.0, 0.0),
            Station::new("C", 7500.0, 0.0),
        ],
        duration: 4.0,
        time_step: TimeStepPolicy::default(),
        sbi: SbiSettings::default(),
        rupture_threshold: RUPTURE_THRESHOLD,
    })
}

fn lvfz_fault() -> FaultSpec {
    let a = 1600.0;
    FaultSpec {
        x2: 0.0,
        rupture: FaultPatch::centered(0.0, 0.0, 60_000.0, 30_000.0),
        friction: SlipWeakening {
            mu_s: 0.677,
            mu_k: 0.564,
            dc: 0.2,
        },
        tau0: 27.5e6,
        tau0_dip: 0.0,
        sigma0: 44e6,
        friction_patches: Vec::new(),
        nucleation: Some(Nucleation {
            patch: FaultPatch {
                min: [-a, -a],
                max: [a, a],
            },
            mechanism: NucleationMechanism::StressStep { shear: 31e6 },
            onset: 0.0,
        }),
    }
}

const LVFZ_THICKNESS: f64 = 1600.0;
const LVFZ_PLANE: [f64; 2] = [80_000.0, 40_000.0];

fn lvfz_domain(half_width: f64) -> Domain {
    Domain {
        x1: [-0.5 * LVFZ_PLANE[0], 0.5 * LVFZ_PLANE[0]],
        x2: [0.0, half_width],
        x3: [-0.5 * LVFZ_PLANE[1], 0.5 * LVFZ_PLANE[1]],
    }
}

/// Fault inside a low-velocity fault zone 1.6 km thick with 20% slower wave
/// speeds. The strip is 2 km wide, widened to the next multiple of `dx`.
pub fn lvfz(dx: f64) -> Result<Scenario> {
    require_multiple(0.5 * LVFZ_THICKNESS, dx, "half fault-zone thickness")?;
    require_multiple(LVFZ_PLANE[1], dx, "fault plane size")?;
    let half_width = round_up(1000.0, dx);
    let domain = lvfz_domain(half_width);
    Ok(Scenario {
        name: "lvfz".into(),
        dx,
        domain,
        symmetric: true,
        materials: vec![host(), reduced_host()],
        regions: vec![RegionSpec {
            min: [domain.x1[0], 0.0, domain.x3[0]],
            max: [domain.x1[1], 0.5 * LVFZ_THICKNESS, domain.x3[1]],
            material: 1,
        }],
        faults: vec![lvfz_fault()],
        stations: vec![
            Station::new("A", 6000.0, 0.0),
            Station::new("B", 12_000.0, 0.0),
            Station::new("C", 20_000.0, 0.0),
        ],
        duration: 10.0,
        time_step: TimeStepPolicy::default(),
        sbi: SbiSettings::default(),
        rupture_threshold: RUPTURE_THRESHOLD,
    })
}

/// Same fault as [`lvfz`] in host rock, with 20% slower material beyond
/// 0.8 km from the fault. The virtual boundary sits `2 dx` inside the slow
/// material.
pub fn offfault_lvz(dx: f64) -> Result<Scenario> {
    require_multiple(0.5 * LVFZ_THICKNESS, dx, "half fault-zone thickness")?;
    require_multiple(LVFZ_PLANE[1], dx, "fault plane size")?;
    let inner = 0.5 * LVFZ_THICKNESS;
    let domain = lvfz_domain(inner + 2.0 * dx);
    Ok(Scenario {
        name: "offfault_lvz".into(),
        dx,
        domain,
        symmetric: true,
        materials: vec![host(), reduced_host()],
        regions: vec![RegionSpec {
            min: [domain.x1[0], inner, domain.x3[0]],
            max: [domain.x1[1], domain.x2[1], domain.x3[1]],
            material: 1,
        }],
        faults: vec![lvfz_fault()],
        stations: vec![
            Station::new("A", 6000.0, 0.0),
            Station::new("B", 15_000.0, 0.0),
            Station::new("C", 24_000.0, 0.0),
        ],
        duration: 14.0,
        time_step: TimeStepPolicy::default(),
        sbi: SbiSettings::default(),
        rupture_threshold: RUPTURE_THRESHOLD,
    })
}

/// Offset between the two step-over faults (m).
pub const STEPOVER_DISTANCE: f64 = 1000.0;

/// Dilational step-over: two parallel faults 1 km apart overlapping by
/// 20 km. The primary fault spans `x1` in [-50, -10] km and nucleates by a
/// strength drop over [-40, -20] km; the secondary spans [-30, 10] km. Both
/// cover `x3` in [0, 10] km with a slip-strengthening top kilometre.
pub fn stepover(dx: f64) -> Result<Scenario> {
    require_multiple(0.5 * STEPOVER_DISTANCE, dx, "half step-over distance")?;
    require_multiple(20_000.0, dx, "fault plane size")?;
    let half_width = round_up(700.0, dx);
    let friction = SlipWeakening {
        mu_s: 0.677,
        mu_k: 0.373,
        dc: 0.5,
    };
    let strengthening = SlipWeakening {
        mu_s: 0.677,
        mu_k: 0.877,
        dc: 0.5,
    };
    let fault = |x2: f64, x1: [f64; 2], nucleation: Option<Nucleation>| FaultSpec {
        x2,
        rupture: FaultPatch {
            min: [x1[0], 0.0],
            max: [x1[1], 10_000.0],
        },
        friction,
        tau0: 71.2e6,
        tau0_dip: 0.0,
        sigma0: 150e6,
        friction_patches: vec![FrictionPatch {
            patch: FaultPatch {
                min: [x1[0], 0.0],
                max: [x1[1], 1000.0],
            },
            friction: strengthening,
        }],
        nucleation,
    };
    let nucleation = Nucleation {
        patch: FaultPatch {
            min: [-40_000.0, 0.0],
            max: [-20_000.0, 10_000.0],
        },
        mechanism: NucleationMechanism::StrengthDrop,
        onset: 0.0,
    };
    let on_secondary = |name: &str, x1: f64| Station {
        name: name.into(),
        x1,
        x3: 5000.0,
        fault: 1,
    };
    Ok(Scenario {
        name: "stepover".into(),
        dx,
        domain: Domain {
            x1: [-60_000.0, 20_000.0],
            x2: [-half_width, half_width],
            x3: [-5000.0, 15_000.0],
        },
        symmetric: false,
        materials: vec![host()],
        regions: Vec::new(),
        faults: vec![
            fault(-0.5 * STEPOVER_DISTANCE, [-50_000.0, -10_000.0], Some(nucleation)),
            fault(0.5 * STEPOVER_DISTANCE, [-30_000.0, 10_000.0], None),
        ],
        stations: vec![
            Station {
                name: "P".into(),
                x1: -30_000.0,
                x3: 5000.0,
                fault: 0,
            },
            on_secondary("A", -20_000.0),
            on_secondary("B", -10_000.0),
            on_secondary("C", 0.0),
        ],
        duration: 20.0,
        time_step: TimeStepPolicy::default(),
        sbi: SbiSettings::default(),
        rupture_threshold: RUPTURE_THRESHOLD,
    })
}

pub const PRESETS: [&str; 4] = ["tpv3", "lvfz", "offfault_lvz", "stepover"];

/// Builds a preset by name. `strip_width` overrides the full strip width
/// where the preset allows it.
pub fn preset(name: &str, dx: f64, strip_width: Option<f64>) -> Result<Scenario> {
    match name {
        "tpv3" => tpv3(dx, strip_width.unwrap_or(4.0 * dx)),
        "lvfz" | "offfault_lvz" | "stepover" => {
            let mut s = match name {
                "lvfz" => lvfz(dx)?,
                "offfault_lvz" => offfault_lvz(dx)?,
                _ => stepover(dx)?,
            };
            if let Some(w) = strip_width {
                set_strip_width(&mut s, w)?;
            }
            Ok(s)
        }
        other => Err(Error::Config(format!(
            "unknown preset '{other}' (expected one of {})",
            PRESETS.join(", ")
        ))),
    }
}

/// Moves the virtual boundaries so the strip is `width` wide in total,
/// keeping the faults and material regions in place.
pub fn set_strip_width(s: &mut Scenario, width: f64) -> Result<()> {
    let (lo, hi) = if s.symmetric {
        (0.0, 0.5 * width)
    } else {
        (-0.5 * width, 0.5 * width)
    };
    require_multiple(hi - lo, s.dx, "strip width")?;
    for f in &s.faults {
        if f.x2 < lo || f.x2 > hi {
            return Err(Error::Config(format!("strip width {width} m excludes the fault at x2 = {}", f.x2)));
        }
    }
    let old = s.domain.x2;
    s.domain.x2 = [lo, hi];
    for r in &mut s.regions {
        if (r.max[1] - old[1]).abs() < 1e-6 * s.dx {
            r.max[1] = hi;
        }
        if (r.min[1] - old[0]).abs() < 1e-6 * s.dx {
            r.min[1] = lo;
        }
        if r.max[1] > hi + 1e-6 * s.dx || r.min[1] < lo - 1e-6 * s.dx {
            return Err(Error::Config(format!("strip width {width} m cuts through a material region")));
        }
    }
    Ok(())
}
