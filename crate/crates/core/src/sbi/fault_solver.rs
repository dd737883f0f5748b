//! Standalone spectral boundary-integral solver for a planar fault between
//! two identical half-spaces.
//!
//! The unknown is the displacement of the upper fault face `u = slip / 2`
//! (tangential components only; the normal traction never changes). The
//! shear traction on the fault is
//!
//! ```text
//! tau = tau0 - (mu / cs) v + f[u]
//! ```
//!
//! where `f` is the fault-plane convolution with the mode II kernel along
//! each wavevector and the mode III kernel across it. Each step uses a
//! predictor-corrector pair: the displacement is first advanced with the old
//! velocity, the velocity is resolved against friction, and the displacement
//! is advanced again with the mean velocity before a final resolve.

use num_complex::Complex64;
use rayon::prelude::*;

use super::boundary::SbiSettings;
use super::kernels::{window_length, FaultPlaneKernels, KernelProvider};
use super::spectral::{wavevector, SpectralPlan};
use crate::error::{Error, Result};
use crate::fault::{resolve_traction, FaultProperties, FaultSpec};
use crate::material::ElasticMaterial;
use crate::record::{FaultHistories, FaultRecorder, Station};

/// Periodic fault grid: `n1 x n3` nodes at spacing `dx` from `origin`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultPlane {
    pub n1: usize,
    pub n3: usize,
    pub dx: f64,
    /// `[x1, x3]` of node `(0, 0)`.
    pub origin: [f64; 2],
}

impl FaultPlane {
    /// Node coordinates in `[k][i]` order.
    pub fn coords(&self) -> Vec<[f64; 2]> {
        (0..self.n3)
            .flat_map(|k| (0..self.n1).map(move |i| (i, k)))
            .map(|(i, k)| [self.origin[0] + i as f64 * self.dx, self.origin[1] + k as f64 * self.dx])
            .collect()
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n3
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy)]
struct Mode {
    index: usize,
    conj: usize,
    k: f64,
    m: f64,
    q: f64,
    weights: usize,
    offset: usize,
}

#[derive(Debug)]
pub struct SbimSolver {
    material: ElasticMaterial,
    plane: FaultPlane,
    dt: f64,
    step: u64,
    spectral: SpectralPlan,
    modes: Vec<Mode>,
    /// Per distinct `|q|`: mode II and mode III weights by lag.
    weights: Vec<[Vec<f64>; 2]>,
    /// Per mode ring of `(U_par, U_perp)`.
    history: Vec<[Complex64; 2]>,
    /// History convolution over lags `>= 1` for the step being taken.
    partial: Vec<[Complex64; 2]>,
    props: FaultProperties,
    u: Vec<[f64; 2]>,
    v: Vec<[f64; 2]>,
    traction: Vec<[f64; 2]>,
    max_slip: Vec<f64>,
    sticking: Vec<bool>,
}

impl SbimSolver {
    /// `max_steps` bounds the run length; history is kept for the whole run
    /// unless `settings` caps it.
    pub fn new(
        spec: &FaultSpec,
        materials: &[ElasticMaterial],
        plane: FaultPlane,
        dt: f64,
        settings: &SbiSettings,
        max_steps: usize,
    ) -> Result<Self> {
        spec.validate()?;
        let material = *materials
            .first()
            .ok_or_else(|| Error::Unsupported("boundary-integral solver needs a material".into()))?;
        if materials.iter().any(|m| m != &material) {
            return Err(Error::Unsupported(
                "the boundary-integral fault solver handles a homogeneous medium only".into(),
            ));
        }
        if !(dt > 0.0) {
            return Err(Error::TimeStep(format!("time step must be positive, got {dt}")));
        }
        let spectral = SpectralPlan::new(plane.n1, plane.n3)?;
        let cap = settings.history_cap.unwrap_or(usize::MAX).min(max_steps.saturating_add(1));
        let mut keys: Vec<(u128, usize)> = Vec::new();
        let mut weights: Vec<[Vec<f64>; 2]> = Vec::new();
        let mut modes = Vec::new();
        let mut offset = 0;
        for (p, r) in spectral.independent_modes() {
            if p == 0 && r == 0 {
                continue;
            }
            let (k, m) = wavevector(p, r, plane.n1, plane.n3, plane.dx);
            let q = k.hypot(m);
            let ps = SpectralPlan::signed_index(p, plane.n1).unsigned_abs() as u128;
            let rs = SpectralPlan::signed_index(r, plane.n3).unsigned_abs() as u128;
            let key = ps * ps * (plane.n3 as u128).pow(2) + rs * rs * (plane.n1 as u128).pow(2);
            let w = match keys.iter().find(|(kk, _)| *kk == key) {
                Some(&(_, w)) => w,
                None => {
                    let window = window_length(q, material.cs(), dt, settings.t_max, cap);
                    let mk = FaultPlaneKernels.mode_kernels(q, &material, dt, window)?;
                    weights.push([mk.h11, mk.h33]);
                    keys.push((key, weights.len() - 1));
                    weights.len() - 1
                }
            };
            let (pc, rc) = spectral.conjugate(p, r);
            modes.push(Mode {
                index: r * plane.n1 + p,
                conj: rc * plane.n1 + pc,
                k,
                m,
                q,
                weights: w,
                offset,
            });
            offset += weights[w][0].len();
        }
        let coords = plane.coords();
        let props = FaultProperties::new(spec, &coords, 1e-6 * plane.dx);
        let n = plane.len();
        let tau0 = props.tau0.clone();
        Ok(Self {
            material,
            plane,
            dt,
            step: 0,
            spectral,
            partial: vec![[Complex64::default(); 2]; modes.len()],
            modes,
            weights,
            history: vec![[Complex64::default(); 2]; offset],
            props,
            u: vec![[0.0; 2]; n],
            v: vec![[0.0; 2]; n],
            traction: tau0,
            max_slip: vec![0.0; n],
            sticking: vec![true; n],
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn plane(&self) -> &FaultPlane {
        &self.plane
    }

    pub fn slip(&self) -> Vec<[f64; 2]> {
        self.u.iter().map(|u| [2.0 * u[0], 2.0 * u[1]]).collect()
    }

    pub fn slip_rate(&self) -> Vec<[f64; 2]> {
        self.v.iter().map(|v| [2.0 * v[0], 2.0 * v[1]]).collect()
    }

    pub fn traction(&self) -> &[[f64; 2]] {
        &self.traction
    }

    pub fn sticking(&self) -> &[bool] {
        &self.sticking
    }

    /// Sum over lags `>= 1` of the stored history, for the step ending at
    /// `step + 1`.
    fn update_partial(&mut self) {
        let newest = self.step;
        let weights = &self.weights;
        let history = &self.history;
        self.modes
            .par_iter()
            .zip(self.partial.par_iter_mut())
            .for_each(|(mode, out)| {
                let [w2, w3] = &weights[mode.weights];
                let len = w2.len();
                let ring = &history[mode.offset..mode.offset + len];
                let mut acc = [Complex64::default(); 2];
                // The newest stored sample is `u_step`, lag 1 from `step + 1`;
                // samples before time zero are zero.
                let available = (newest as usize + 1).min(len - 1);
                for lag in 1..=available {
                    let slot = ((newest + 1 - lag as u64) % len as u64) as usize;
                    let s = ring[slot];
                    acc[0] += s[0] * w2[lag];
                    acc[1] += s[1] * w3[lag];
                }
                *out = acc;
            });
    }

    fn rotate(&self, u: &[[f64; 2]]) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let a: Vec<f64> = u.iter().map(|x| x[0]).collect();
        let b: Vec<f64> = u.iter().map(|x| x[1]).collect();
        Ok((self.spectral.forward(&a)?, self.spectral.forward(&b)?))
    }

    /// Nonlocal traction `f[u]` for the trial displacement `u` at the new
    /// time level.
    fn nonlocal(&self, u: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        let (u1, u3) = self.rotate(u)?;
        let mu = self.material.shear_modulus();
        let n = self.plane.len();
        let mut s1 = vec![Complex64::default(); n];
        let mut s3 = vec![Complex64::default(); n];
        for (mode, partial) in self.modes.iter().zip(&self.partial) {
            let [w2, w3] = &self.weights[mode.weights];
            let (a, b) = (u1[mode.index], u3[mode.index]);
            let par = (a * mode.k + b * mode.m) / mode.q;
            let perp = (b * mode.k - a * mode.m) / mode.q;
            let f_par = (par * w2[0] + partial[0]) * (-mu * mode.q);
            let f_perp = (perp * w3[0] + partial[1]) * (-mu * mode.q);
            let x1 = (f_par * mode.k - f_perp * mode.m) / mode.q;
            let x3 = (f_par * mode.m + f_perp * mode.k) / mode.q;
            if mode.conj == mode.index {
                s1[mode.index] = Complex64::new(x1.re, 0.0);
                s3[mode.index] = Complex64::new(x3.re, 0.0);
            } else {
                s1[mode.index] = x1;
                s1[mode.conj] = x1.conj();
                s3[mode.index] = x3;
                s3[mode.conj] = x3.conj();
            }
        }
        self.spectral.inverse_in_place(&mut s1)?;
        self.spectral.inverse_in_place(&mut s3)?;
        Ok(s1.iter().zip(&s3).map(|(a, b)| [a.re, b.re]).collect())
    }

    /// Velocity and traction satisfying friction for trial displacement `u`.
    fn resolve(&mut self, u: &[[f64; 2]], commit: bool) -> Result<Vec<[f64; 2]>> {
        let f = self.nonlocal(u)?;
        let radiation = self.material.shear_impedance();
        let mut v = vec![[0.0; 2]; u.len()];
        for i in 0..u.len() {
            let tau0 = self.props.tau0[i];
            let locked_traction = [tau0[0] + f[i][0], tau0[1] + f[i][1]];
            let slip = 2.0 * u[i][0].hypot(u[i][1]);
            let max_slip = self.max_slip[i].max(slip);
            let (tau, sticks) = if self.props.locked[i] {
                (locked_traction, true)
            } else {
                let strength = self.props.sigma0.max(0.0) * self.props.law[i].coefficient(max_slip);
                resolve_traction(locked_traction, strength)
            };
            if !sticks {
                v[i] = [
                    (locked_traction[0] - tau[0]) / radiation,
                    (locked_traction[1] - tau[1]) / radiation,
                ];
            }
            if commit {
                self.max_slip[i] = max_slip;
                self.traction[i] = tau;
                self.sticking[i] = sticks;
            }
        }
        Ok(v)
    }

    pub fn step(&mut self) -> Result<()> {
        self.props.apply_nucleation(self.time());
        self.update_partial();
        let dt = self.dt;
        let predicted: Vec<[f64; 2]> = self
            .u
            .iter()
            .zip(&self.v)
            .map(|(u, v)| [u[0] + dt * v[0], u[1] + dt * v[1]])
            .collect();
        let v_star = self.resolve(&predicted, false)?;
        let corrected: Vec<[f64; 2]> = self
            .u
            .iter()
            .zip(self.v.iter().zip(&v_star))
            .map(|(u, (v, w))| [u[0] + 0.5 * dt * (v[0] + w[0]), u[1] + 0.5 * dt * (v[1] + w[1])])
            .collect();
        let v_new = self.resolve(&corrected, true)?;
        let peak = v_new.iter().fold(0.0_f64, |m, v| m.max(2.0 * v[0].hypot(v[1])));
        if !(peak < crate::fem::BLOWUP_VELOCITY) {
            return Err(Error::Unstable {
                step: self.step + 1,
                time: self.time() + dt,
                max_velocity: peak,
            });
        }
        self.u = corrected;
        self.v = v_new;
        self.step += 1;
        self.push_history()
    }

    fn push_history(&mut self) -> Result<()> {
        let (u1, u3) = self.rotate(&self.u)?;
        let slot_of = |len: usize| (self.step % len as u64) as usize;
        for mode in &self.modes {
            let len = self.weights[mode.weights][0].len();
            let (a, b) = (u1[mode.index], u3[mode.index]);
            let par = (a * mode.k + b * mode.m) / mode.q;
            let perp = (b * mode.k - a * mode.m) / mode.q;
            self.history[mode.offset + slot_of(len)] = [par, perp];
        }
        Ok(())
    }
}

/// Runs the boundary-integral reference for `duration` and records the
/// given stations.
pub fn sbim_fault_solver(
    spec: &FaultSpec,
    materials: &[ElasticMaterial],
    plane: FaultPlane,
    dt: f64,
    duration: f64,
    stations: &[Station],
    settings: &SbiSettings,
) -> Result<FaultHistories> {
    let steps = (duration / dt).round() as usize;
    let mut solver = SbimSolver::new(spec, materials, plane, dt, settings, steps)?;
    let mut recorder = FaultRecorder::new(stations, plane.coords(), 0.5 * plane.dx)?;
    let normal = vec![spec.sigma0; plane.len()];
    for _ in 0..steps {
        solver.step()?;
        recorder.record(solver.time(), &solver.slip(), &solver.slip_rate(), solver.traction(), &normal);
    }
    Ok(recorder.finish(solver.slip()))
}
