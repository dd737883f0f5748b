//! Planar split-node faults with linear slip-weakening friction.
//!
//! A fault lies on a node plane `x2 = const`. The local frame is
//! `(x1, x2, x3)`: components 0 and 2 are tangential, component 1 is normal.
//! Tractions follow the balance `tau = -tau_plus = tau_minus`, so a positive
//! traction component pushes the upper side towards negative coordinates.
//! Normal stress is positive in compression.
//!
//! The finite-element state is the perturbation from an initial equilibrium
//! in which the fault carries the prestress `tau0`. Each step the solver
//! computes the perturbation `tau_stick` that would keep the fault stuck, tests
//! `tau0 + tau_stick` against the strength and applies the nodal force
//! `-A (tau - tau0)` to the upper side and the opposite to the lower side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{DofLayout, LumpedMass, SimulationState};

/// Linear slip-weakening law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlipWeakening {
    pub mu_s: f64,
    pub mu_k: f64,
    /// Critical slip distance (m).
    pub dc: f64,
}

impl SlipWeakening {
    pub fn new(mu_s: f64, mu_k: f64, dc: f64) -> Result<Self> {
        let law = Self { mu_s, mu_k, dc };
        law.validate()?;
        Ok(law)
    }

    /// Checks `mu_s >= mu_k > 0` and `dc > 0`.
    pub fn validate(&self) -> Result<()> {
        self.validate_positive()?;
        if self.mu_s < self.mu_k {
            return Err(Error::Fault(format!(
                "static friction {} below kinetic friction {}",
                self.mu_s, self.mu_k
            )));
        }
        Ok(())
    }

    /// Checks only positivity, allowing slip-strengthening laws with
    /// `mu_k > mu_s`.
    pub fn validate_positive(&self) -> Result<()> {
        let ok = self.mu_s.is_finite() && self.mu_k.is_finite() && self.mu_s > 0.0 && self.mu_k > 0.0;
        if !ok || !(self.dc.is_finite() && self.dc > 0.0) {
            return Err(Error::Fault(format!(
                "friction parameters must be positive (mu_s = {}, mu_k = {}, dc = {})",
                self.mu_s, self.mu_k, self.dc
            )));
        }
        Ok(())
    }

    pub fn coefficient(&self, slip: f64) -> f64 {
        if slip >= self.dc {
            self.mu_k
        } else {
            self.mu_s - (self.mu_s - self.mu_k) * slip.max(0.0) / self.dc
        }
    }
}

pub fn friction_coefficient(law: &SlipWeakening, slip: f64) -> f64 {
    law.coefficient(slip)
}

/// Rectangle on the fault plane in `(x1, x3)` coordinates, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultPatch {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl FaultPatch {
    pub fn centered(x1: f64, x3: f64, width: f64, height: f64) -> Self {
        Self {
            min: [x1 - 0.5 * width, x3 - 0.5 * height],
            max: [x1 + 0.5 * width, x3 + 0.5 * height],
        }
    }

    pub fn contains(&self, x1: f64, x3: f64, tol: f64) -> bool {
        x1 >= self.min[0] - tol && x1 <= self.max[0] + tol && x3 >= self.min[1] - tol && x3 <= self.max[1] + tol
    }

    fn within(&self, outer: &FaultPatch, tol: f64) -> bool {
        self.min[0] >= outer.min[0] - tol
            && self.min[1] >= outer.min[1] - tol
            && self.max[0] <= outer.max[0] + tol
            && self.max[1] <= outer.max[1] + tol
    }
}

/// Friction law replacing the fault's default law inside a patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionPatch {
    pub patch: FaultPatch,
    pub friction: SlipWeakening,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NucleationMechanism {
    /// Shear prestress along `x1` raised to `shear` (Pa).
    StressStep { shear: f64 },
    /// Static friction dropped to the kinetic value.
    StrengthDrop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nucleation {
    pub patch: FaultPatch,
    pub mechanism: NucleationMechanism,
    #[serde(default)]
    pub onset: f64,
}

/// Configuration of one planar fault.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    /// Position of the fault plane (m).
    pub x2: f64,
    /// Region where friction applies; the rest of the plane never slips.
    pub rupture: FaultPatch,
    pub friction: SlipWeakening,
    /// Background shear prestress along `x1` (Pa).
    pub tau0: f64,
    /// Background shear prestress along `x3` (Pa).
    #[serde(default)]
    pub tau0_dip: f64,
    /// Background normal stress, compression positive (Pa).
    pub sigma0: f64,
    #[serde(default)]
    pub friction_patches: Vec<FrictionPatch>,
    #[serde(default)]
    pub nucleation: Option<Nucleation>,
}

impl FaultSpec {
    pub fn validate(&self) -> Result<()> {
        self.friction.validate()?;
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return Err(Error::Fault(format!("sigma0 must be > 0, got {}", self.sigma0)));
        }
        if !(self.tau0.is_finite() && self.tau0_dip.is_finite()) {
            return Err(Error::Fault("prestress must be finite".into()));
        }
        for p in &self.friction_patches {
            p.friction.validate_positive()?;
        }
        if let Some(n) = &self.nucleation {
            if !n.patch.within(&self.rupture, 1e-6) {
                return Err(Error::Fault("nucleation patch extends outside the rupture region".into()));
            }
            if let NucleationMechanism::StressStep { shear } = n.mechanism {
                if !shear.is_finite() {
                    return Err(Error::Fault("nucleation shear must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// Strength excess over stress drop, `(mu_s sigma0 - tau0) / (tau0 - mu_k sigma0)`.
    pub fn strength_ratio(&self) -> f64 {
        let f = &self.friction;
        (f.mu_s * self.sigma0 - self.tau0) / (self.tau0 - f.mu_k * self.sigma0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    /// Fault on the bottom plane of an upper-half model; the lower half is
    /// the mirror image, so slip is twice the one-sided displacement and the
    /// normal traction never changes.
    Symmetric,
    /// Split nodes with both sides in the model.
    TwoSided,
}

/// Stick traction `Z jump / 2`.
pub fn stick_traction(impedance: f64, jump: f64) -> f64 {
    0.5 * impedance * jump
}

/// Applies the stick-slip condition to a total tangential traction
/// candidate. Returns the resolved traction and whether the node sticks.
pub fn resolve_traction(candidate: [f64; 2], strength: f64) -> ([f64; 2], bool) {
    let mag = candidate[0].hypot(candidate[1]);
    if mag <= strength {
        (candidate, true)
    } else {
        let s = strength / mag;
        ([candidate[0] * s, candidate[1] * s], false)
    }
}

/// Per-node friction law, prestress and nucleation of a fault.
#[derive(Debug, Clone)]
pub struct FaultProperties {
    pub law: Vec<SlipWeakening>,
    /// Nodes outside the rupture region never slip.
    pub locked: Vec<bool>,
    pub tau0: Vec<[f64; 2]>,
    pub sigma0: f64,
    nucleation: Option<(Nucleation, Vec<usize>)>,
    nucleated: bool,
}

impl FaultProperties {
    /// Evaluates `spec` at fault nodes `coords` (`[x1, x3]`).
    pub fn new(spec: &FaultSpec, coords: &[[f64; 2]], tol: f64) -> Self {
        let locked: Vec<bool> = coords.iter().map(|x| !spec.rupture.contains(x[0], x[1], tol)).collect();
        let law = coords
            .iter()
            .map(|x| {
                spec.friction_patches
                    .iter()
                    .rev()
                    .find(|p| p.patch.contains(x[0], x[1], tol))
                    .map_or(spec.friction, |p| p.friction)
            })
            .collect();
        let nucleation = spec.nucleation.map(|n| {
            let nodes = coords
                .iter()
                .enumerate()
                .filter(|(i, x)| !locked[*i] && n.patch.contains(x[0], x[1], tol))
                .map(|(i, _)| i)
                .collect();
            (n, nodes)
        });
        Self {
            law,
            locked,
            tau0: vec![[spec.tau0, spec.tau0_dip]; coords.len()],
            sigma0: spec.sigma0,
            nucleation,
            nucleated: false,
        }
    }

    /// Activates the nucleation mechanism once `time >= onset`.
    pub fn apply_nucleation(&mut self, time: f64) {
        let Some((nuc, nodes)) = &self.nucleation else {
            return;
        };
        if self.nucleated || time < nuc.onset {
            return;
        }
        for &i in nodes {
            match nuc.mechanism {
                NucleationMechanism::StressStep { shear } => self.tau0[i][0] = shear,
                NucleationMechanism::StrengthDrop => self.law[i].mu_s = self.law[i].mu_k,
            }
        }
        self.nucleated = true;
    }

    pub fn nucleation_nodes(&self) -> &[usize] {
        self.nucleation.as_ref().map_or(&[], |(_, n)| n.as_slice())
    }
}

/// Runtime state of a fault.
#[derive(Debug, Clone)]
pub struct FaultSurface {
    mode: FaultMode,
    plane: usize,
    plus: Vec<usize>,
    minus: Vec<usize>,
    coords: Vec<[f64; 2]>,
    area: f64,
    props: FaultProperties,
    impedance: Vec<f64>,
    slip: Vec<[f64; 2]>,
    max_slip: Vec<f64>,
    slip_rate: Vec<[f64; 2]>,
    traction: Vec<[f64; 2]>,
    normal_stress: Vec<f64>,
    sticking: Vec<bool>,
}

/// Free velocity `v_pred - dt a_t / 2 + dt M^-1 r` of one node, the
/// velocity the node would reach half a step after `t + 1` without fault
/// forces.
pub fn free_velocity(state: &SimulationState, mass: &LumpedMass, r: &[f64], node: usize) -> [f64; 3] {
    let dt = state.dt;
    let inv = mass.inverse()[node];
    let d = 3 * node;
    [0, 1, 2].map(|c| state.v_pred[d + c] - 0.5 * dt * state.a[d + c] + dt * inv * r[d + c])
}

impl FaultSurface {
    pub fn new(spec: &FaultSpec, layout: &DofLayout, mode: FaultMode) -> Result<Self> {
        spec.validate()?;
        let dx = layout.dx();
        let j = {
            let origin_x2 = layout.node_coords(0)[1];
            let r = (spec.x2 - origin_x2) / dx;
            let n = r.round();
            if (r - n).abs() > 1e-6 || n < 0.0 || n as usize >= layout.node_planes() {
                return Err(Error::Fault(format!("fault plane x2 = {} is not a node plane", spec.x2)));
            }
            n as usize
        };
        let plus: Vec<usize> = layout.plane(j).collect();
        let minus: Vec<usize> = match mode {
            FaultMode::Symmetric => {
                if j != 0 {
                    return Err(Error::Fault("a symmetric fault must lie on the bottom plane of the model".into()));
                }
                Vec::new()
            }
            FaultMode::TwoSided => {
                let s = layout
                    .split_index(j)
                    .ok_or_else(|| Error::Fault(format!("node plane {j} is not split")))?;
                layout.lower_plane(s).collect()
            }
        };
        let tol = 1e-6 * dx;
        let coords: Vec<[f64; 2]> = plus
            .iter()
            .map(|&n| {
                let x = layout.node_coords(n);
                [x[0], x[2]]
            })
            .collect();
        let props = FaultProperties::new(spec, &coords, tol);
        let count = plus.len();
        Ok(Self {
            mode,
            plane: j,
            plus,
            minus,
            coords,
            area: dx * dx,
            props,
            impedance: Vec::new(),
            slip: vec![[0.0; 2]; count],
            max_slip: vec![0.0; count],
            slip_rate: vec![[0.0; 2]; count],
            traction: vec![[spec.tau0, spec.tau0_dip]; count],
            normal_stress: vec![spec.sigma0; count],
            sticking: vec![true; count],
        })
    }

    pub fn mode(&self) -> FaultMode {
        self.mode
    }

    pub fn plane(&self) -> usize {
        self.plane
    }

    pub fn len(&self) -> usize {
        self.plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty()
    }

    pub fn plus_nodes(&self) -> &[usize] {
        &self.plus
    }

    pub fn minus_nodes(&self) -> &[usize] {
        &self.minus
    }

    /// `(x1, x3)` of fault node `i`.
    pub fn coords(&self, i: usize) -> [f64; 2] {
        self.coords[i]
    }

    pub fn tributary_area(&self) -> f64 {
        self.area
    }

    pub fn is_locked(&self, i: usize) -> bool {
        self.props.locked[i]
    }

    pub fn law(&self, i: usize) -> &SlipWeakening {
        &self.props.law[i]
    }

    pub fn prestress(&self, i: usize) -> [f64; 2] {
        self.props.tau0[i]
    }

    pub fn slip(&self) -> &[[f64; 2]] {
        &self.slip
    }

    pub fn max_slip(&self) -> &[f64] {
        &self.max_slip
    }

    pub fn slip_rate(&self) -> &[[f64; 2]] {
        &self.slip_rate
    }

    /// Total shear traction on the fault.
    pub fn traction(&self) -> &[[f64; 2]] {
        &self.traction
    }

    pub fn normal_stress(&self) -> &[f64] {
        &self.normal_stress
    }

    pub fn sticking(&self) -> &[bool] {
        &self.sticking
    }

    pub fn impedance(&self) -> &[f64] {
        &self.impedance
    }

    /// Fault node nearest to `(x1, x3)`.
    pub fn nearest_node(&self, x1: f64, x3: f64) -> usize {
        let d = |c: &[f64; 2]| (c[0] - x1).powi(2) + (c[1] - x3).powi(2);
        (0..self.len())
            .min_by(|&a, &b| d(&self.coords[a]).total_cmp(&d(&self.coords[b])))
            .unwrap_or(0)
    }

    /// Index of the fault node exactly at `(x1, x3)`.
    pub fn node_at(&self, x1: f64, x3: f64, tol: f64) -> Option<usize> {
        let n = self.nearest_node(x1, x3);
        let c = self.coords.get(n)?;
        ((c[0] - x1).abs() <= tol && (c[1] - x3).abs() <= tol).then_some(n)
    }

    /// Computes the per-node impedance `Z` with
    /// `Z^-1 = dt (A / m_plus + A / m_minus) / 2`; in symmetric mode both
    /// sides carry the upper-side mass.
    pub fn compute_impedance(&mut self, mass: &LumpedMass, dt: f64) -> Result<()> {
        let m = mass.node_mass();
        let mut z = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let mp = m[self.plus[i]];
            let mm = match self.mode {
                FaultMode::Symmetric => mp,
                FaultMode::TwoSided => m[self.minus[i]],
            };
            if !(mp > 0.0 && mm > 0.0) {
                return Err(Error::Fault(format!("fault node {i} has zero mass")));
            }
            z.push(2.0 / (dt * self.area * (1.0 / mp + 1.0 / mm)));
        }
        self.impedance = z;
        Ok(())
    }

    /// Activates the nucleation mechanism once `time >= onset`.
    pub fn apply_nucleation(&mut self, time: f64) {
        self.props.apply_nucleation(time);
    }

    pub fn properties(&self) -> &FaultProperties {
        &self.props
    }

    /// Jump of the free velocity across fault node `i`, `[x1, x2, x3]`.
    pub fn free_jump(&self, state: &SimulationState, mass: &LumpedMass, r: &[f64], i: usize) -> [f64; 3] {
        let vp = free_velocity(state, mass, r, self.plus[i]);
        match self.mode {
            FaultMode::Symmetric => [2.0 * vp[0], 0.0, 2.0 * vp[2]],
            FaultMode::TwoSided => {
                let vm = free_velocity(state, mass, r, self.minus[i]);
                [vp[0] - vm[0], vp[1] - vm[1], vp[2] - vm[2]]
            }
        }
    }

    /// Current tangential slip of node `i` from displacements `u`.
    pub fn slip_from(&self, u: &[f64], i: usize) -> [f64; 2] {
        let p = 3 * self.plus[i];
        match self.mode {
            FaultMode::Symmetric => [2.0 * u[p], 2.0 * u[p + 2]],
            FaultMode::TwoSided => {
                let m = 3 * self.minus[i];
                [u[p] - u[m], u[p + 2] - u[m + 2]]
            }
        }
    }

    /// Resolves the fault tractions for the step ending at `state.time + dt`
    /// and adds the fault nodal forces to `force`.
    ///
    /// `state` must hold the predicted `u_{t+1}` and `v_pred`; `force` holds
    /// `f - K u_{t+1}` on entry.
    pub fn solve(&mut self, state: &SimulationState, mass: &LumpedMass, force: &mut [f64]) -> Result<()> {
        if self.impedance.len() != self.len() {
            return Err(Error::Fault("impedance not computed".into()));
        }
        self.apply_nucleation(state.time);
        for i in 0..self.len() {
            let slip = self.slip_from(&state.u, i);
            self.max_slip[i] = self.max_slip[i].max(slip[0].hypot(slip[1]));
            let jump = self.free_jump(state, mass, force, i);
            let z = self.impedance[i];
            let stick = [
                stick_traction(z, jump[0]),
                stick_traction(z, jump[1]),
                stick_traction(z, jump[2]),
            ];
            let tau0 = self.props.tau0[i];
            let candidate = [tau0[0] + stick[0], tau0[1] + stick[2]];
            let (normal_pert, sigma_n) = match self.mode {
                FaultMode::Symmetric => (0.0, self.props.sigma0),
                FaultMode::TwoSided => (stick[1], self.props.sigma0 - stick[1]),
            };
            let (tau, sticks) = if self.props.locked[i] {
                (candidate, true)
            } else {
                let strength = sigma_n.max(0.0) * self.props.law[i].coefficient(self.max_slip[i]);
                resolve_traction(candidate, strength)
            };
            self.traction[i] = tau;
            self.normal_stress[i] = sigma_n;
            self.sticking[i] = sticks;
            let a = self.area;
            let f = [-a * (tau[0] - tau0[0]), -a * normal_pert, -a * (tau[1] - tau0[1])];
            let p = 3 * self.plus[i];
            for c in 0..3 {
                force[p + c] += f[c];
            }
            if self.mode == FaultMode::TwoSided {
                let m = 3 * self.minus[i];
                for c in 0..3 {
                    force[m + c] -= f[c];
                }
            }
        }
        Ok(())
    }

    /// Refreshes slip and slip rate from the corrected state.
    pub fn update(&mut self, state: &SimulationState) {
        for i in 0..self.len() {
            self.slip[i] = self.slip_from(&state.u, i);
            self.slip_rate[i] = self.slip_from(&state.v, i);
        }
    }

    /// Largest slip-rate magnitude on the fault.
    pub fn max_slip_rate(&self) -> f64 {
        self.slip_rate.iter().fold(0.0_f64, |m, v| m.max(v[0].hypot(v[1])))
    }
}
