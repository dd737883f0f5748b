//! Spectral boundary-integral closure on a virtual plane of the strip.
//!
//! The half-space beyond the plane responds to the plane's displacement
//! history with the traction
//!
//! ```text
//! tau = tau_far - eta (mu / cs) v + s[u]
//! ```
//!
//! on the strip, where `eta = diag(1, cp / cs, 1)` and the nonlocal part `s`
//! is a per-mode convolution of the displacement history. For a mode with
//! wavevector `(k, m)` and `q = |(k, m)|` the displacement is split into the
//! in-plane part along the wavevector, the normal part and the antiplane part:
//!
//! ```text
//! s_par  = -mu q (H11 * U_par + i sigma H12 * U_2)
//! s_2    = -mu q (H22 * U_2   - i sigma H12 * U_par)
//! s_perp = -mu q  H33 * U_perp
//! ```
//!
//! with `sigma = +1` for a half-space above the plane and `-1` below it. The
//! uniform mode has no static stiffness and only radiates.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernels::{window_length, KernelProvider, DEFAULT_T_MAX};
use super::spectral::{wavevector, SpectralPlan};
use crate::error::{Error, Result};
use crate::material::ElasticMaterial;

/// Which side of the plane the half-space occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Half-space at larger `x2` (the `S+` plane).
    Upper,
    /// Half-space at smaller `x2` (the `S-` plane).
    Lower,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbiSettings {
    /// Convolution truncation horizon in units of `q cs t`.
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    /// Upper bound on stored history samples per mode.
    #[serde(default)]
    pub history_cap: Option<usize>,
}

fn default_t_max() -> f64 {
    DEFAULT_T_MAX
}

impl Default for SbiSettings {
    fn default() -> Self {
        Self {
            t_max: DEFAULT_T_MAX,
            history_cap: None,
        }
    }
}

/// Reversed convolution weights shared by all modes with the same `|q|`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub q: f64,
    window: usize,
    rev: [Vec<f64>; 4],
}

impl KernelTable {
    pub fn window(&self) -> usize {
        self.window
    }

    /// Weight of kernel `kernel` (0: H11, 1: H22, 2: H12, 3: H33) at `lag`.
    pub fn weight(&self, kernel: usize, lag: usize) -> f64 {
        self.rev[kernel][self.window - 1 - lag]
    }
}

/// Lags convolved per pass so a block of shared weights stays in cache
/// while every mode of its group reads it.
const LAG_BLOCK: usize = 512;

#[derive(Debug, Clone, Copy)]
struct Mode {
    index: usize,
    conj: usize,
    k: f64,
    m: f64,
    q: f64,
    table: usize,
    offset: usize,
}

#[derive(Debug, Clone)]
pub struct SbiBoundary {
    side: Side,
    material: ElasticMaterial,
    n1: usize,
    n3: usize,
    dx: f64,
    dt: f64,
    plan: SpectralPlan,
    modes: Vec<Mode>,
    /// Ranges of `modes` sharing one kernel table, which are stored contiguously.
    groups: Vec<std::ops::Range<usize>>,
    tables: Vec<KernelTable>,
    history: Vec<[Complex64; 3]>,
    pushed: u64,
    last_step: Option<u64>,
    far_field: [f64; 3],
    nonlocal: Vec<f64>,
}

impl SbiBoundary {
    /// Builds a boundary on an `n1 x n3` periodic plane. `max_steps` bounds
    /// the history that can ever be needed and may be `usize::MAX`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        side: Side,
        material: ElasticMaterial,
        n1: usize,
        n3: usize,
        dx: f64,
        dt: f64,
        provider: &dyn KernelProvider,
        settings: &SbiSettings,
        max_steps: usize,
    ) -> Result<Self> {
        if !(dt > 0.0 && dx > 0.0) {
            return Err(Error::TimeStep("boundary needs positive dx and dt".into()));
        }
        if !(settings.t_max > 0.0) {
            return Err(Error::Config("t_max must be positive".into()));
        }
        let plan = SpectralPlan::new(n1, n3)?;
        let cap = settings.history_cap.unwrap_or(usize::MAX).min(max_steps.saturating_add(1));
        let mut by_key: HashMap<u128, usize> = HashMap::new();
        let mut tables: Vec<KernelTable> = Vec::new();
        let mut modes = Vec::new();
        for (p, r) in plan.independent_modes() {
            if p == 0 && r == 0 {
                continue;
            }
            let (k, m) = wavevector(p, r, n1, n3, dx);
            let q = k.hypot(m);
            let ps = SpectralPlan::signed_index(p, n1).unsigned_abs() as u128;
            let rs = SpectralPlan::signed_index(r, n3).unsigned_abs() as u128;
            let key = ps * ps * (n3 as u128).pow(2) + rs * rs * (n1 as u128).pow(2);
            let table = match by_key.get(&key) {
                Some(&t) => t,
                None => {
                    let window = window_length(q, material.cs(), dt, settings.t_max, cap);
                    let w = provider.mode_kernels(q, &material, dt, window)?;
                    let rev = |v: Vec<f64>| -> Vec<f64> { v.into_iter().rev().collect() };
                    tables.push(KernelTable {
                        q,
                        window,
                        rev: [rev(w.h11), rev(w.h22), rev(w.h12), rev(w.h33)],
                    });
                    by_key.insert(key, tables.len() - 1);
                    tables.len() - 1
                }
            };
            let (pc, rc) = plan.conjugate(p, r);
            modes.push(Mode {
                index: r * n1 + p,
                conj: rc * n1 + pc,
                k,
                m,
                q,
                table,
                offset: 0,
            });
        }
        modes.sort_by_key(|m| m.table);
        let mut offset = 0;
        let mut groups: Vec<std::ops::Range<usize>> = Vec::new();
        for i in 0..modes.len() {
            modes[i].offset = offset;
            offset += tables[modes[i].table].window;
            match groups.last_mut() {
                Some(g) if modes[g.start].table == modes[i].table => g.end = i + 1,
                _ => groups.push(i..i + 1),
            }
        }
        Ok(Self {
            side,
            material,
            n1,
            n3,
            dx,
            dt,
            plan,
            modes,
            groups,
            tables,
            history: vec![[Complex64::default(); 3]; offset],
            pushed: 0,
            last_step: None,
            far_field: [0.0; 3],
            nonlocal: vec![0.0; 3 * n1 * n3],
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn material(&self) -> &ElasticMaterial {
        &self.material
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n1, self.n3)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn node_count(&self) -> usize {
        self.n1 * self.n3
    }

    pub fn far_field(&self) -> [f64; 3] {
        self.far_field
    }

    pub fn set_far_field(&mut self, tau: [f64; 3]) {
        self.far_field = tau;
    }

    /// Number of nonzero modes with their own history.
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn tables(&self) -> &[KernelTable] {
        &self.tables
    }

    /// Stored history samples over all modes.
    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn steps_pushed(&self) -> u64 {
        self.pushed
    }

    /// Radiation coefficients `eta` per component.
    pub fn eta(&self) -> [f64; 3] {
        [1.0, self.material.cp() / self.material.cs(), 1.0]
    }

    /// Appends the plane displacement of `step` (interleaved components,
    /// `[k][i]` node order) and evaluates the nonlocal traction.
    pub fn push_history(&mut self, step: u64, u: &[f64]) -> Result<()> {
        if let Some(last) = self.last_step {
            if step <= last {
                return Err(Error::DoublePush(step));
            }
        }
        let expected = 3 * self.node_count();
        if u.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                got: u.len(),
            });
        }
        let spectra = [
            self.plan.forward_component(u, 0)?,
            self.plan.forward_component(u, 1)?,
            self.plan.forward_component(u, 2)?,
        ];
        let slot = self.pushed;
        let tables = &self.tables;
        let modes = &self.modes;
        let mut chunks: Vec<&mut [[Complex64; 3]]> = Vec::with_capacity(modes.len());
        let mut rest: &mut [[Complex64; 3]] = &mut self.history;
        for mode in modes {
            let (head, tail) = rest.split_at_mut(tables[mode.table].window);
            chunks.push(head);
            rest = tail;
        }
        chunks.into_par_iter().zip(modes.par_iter()).for_each(|(ring, mode)| {
            let u1 = spectra[0][mode.index];
            let u2 = spectra[1][mode.index];
            let u3 = spectra[2][mode.index];
            let par = (u1 * mode.k + u3 * mode.m) / mode.q;
            let perp = (u3 * mode.k - u1 * mode.m) / mode.q;
            let pos = (slot % ring.len() as u64) as usize;
            ring[pos] = [par, u2, perp];
        });
        self.pushed += 1;
        self.last_step = Some(step);
        self.compute_nonlocal()
    }

    fn compute_nonlocal(&mut self) -> Result<()> {
        let mu = self.material.shear_modulus();
        let sigma = self.side.sign();
        let newest = self.pushed - 1;
        let tables = &self.tables;
        let history = &self.history;
        let modes = &self.modes;
        let per_mode: Vec<[Complex64; 3]> = self
            .groups
            .par_iter()
            .flat_map_iter(|group| {
                let members = &modes[group.clone()];
                let table = &tables[members[0].table];
                let w = table.window;
                let head = (newest % w as u64) as usize;
                let mut acc = vec![[Complex64::default(); 5]; members.len()];
                let segments = [(0..head + 1, w - 1 - head), (head + 1..w, 0)];
                for (range, first) in segments {
                    let mut start = range.start;
                    while start < range.end {
                        let end = (start + LAG_BLOCK).min(range.end);
                        let rev = first + (start - range.start);
                        for (mode, a) in members.iter().zip(acc.iter_mut()) {
                            let ring = &history[mode.offset..mode.offset + w];
                            convolve(ring, table, start..end, rev, a);
                        }
                        start = end;
                    }
                }
                members.iter().zip(acc).map(move |(mode, [c11, c12b, c22, c12a, c33])| {
                    let i_sigma = Complex64::new(0.0, sigma);
                    let scale = -mu * mode.q;
                    let s_par = (c11 + i_sigma * c12b) * scale;
                    let s2 = (c22 - i_sigma * c12a) * scale;
                    let s_perp = c33 * scale;
                    [
                        (s_par * mode.k - s_perp * mode.m) / mode.q,
                        s2,
                        (s_par * mode.m + s_perp * mode.k) / mode.q,
                    ]
                })
            })
            .collect();
        let n = self.node_count();
        let mut spectra = vec![vec![Complex64::default(); n]; 3];
        for (mode, s) in self.modes.iter().zip(&per_mode) {
            for c in 0..3 {
                if mode.conj == mode.index {
                    spectra[c][mode.index] = Complex64::new(s[c].re, 0.0);
                } else {
                    spectra[c][mode.index] = s[c];
                    spectra[c][mode.conj] = s[c].conj();
                }
            }
        }
        for (c, spectrum) in spectra.iter_mut().enumerate() {
            self.plan.inverse_in_place(spectrum)?;
            for (node, v) in spectrum.iter().enumerate() {
                self.nonlocal[3 * node + c] = v.re;
            }
        }
        Ok(())
    }

    /// Nonlocal traction `s` after the latest push (interleaved components).
    pub fn nonlocal_term(&self) -> &[f64] {
        &self.nonlocal
    }

    /// Traction on the strip for plane velocities `v`.
    pub fn traction(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let expected = 3 * self.node_count();
        if v.len() != expected || out.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                got: v.len().min(out.len()),
            });
        }
        let z = self.material.shear_impedance();
        let eta = self.eta();
        for ((o, v), s) in out.chunks_exact_mut(3).zip(v.chunks_exact(3)).zip(self.nonlocal.chunks_exact(3)) {
            for c in 0..3 {
                o[c] = self.far_field[c] - eta[c] * z * v[c] + s[c];
            }
        }
        Ok(())
    }

    /// History sample of mode `(p, r)` at `lag` steps back, in the rotated
    /// components `(par, normal, perp)`.
    pub fn history_sample(&self, p: usize, r: usize, lag: usize) -> Option<[Complex64; 3]> {
        let index = r * self.n1 + p;
        let mode = self.modes.iter().find(|m| m.index == index)?;
        let w = self.tables[mode.table].window;
        if lag >= w || lag as u64 >= self.pushed {
            return None;
        }
        let pos = ((self.pushed - 1 - lag as u64) % w as u64) as usize;
        Some(self.history[mode.offset + pos])
    }
}

/// Accumulates `sum w[lag] * U[lag]` over a contiguous ring segment. `first`
/// is the reversed-weight index matching the segment start.
#[inline]
fn convolve(
    ring: &[[Complex64; 3]],
    table: &KernelTable,
    range: std::ops::Range<usize>,
    first: usize,
    acc: &mut [Complex64; 5],
) {
    let len = range.len();
    let seg = &ring[range];
    let [w11, w22, w12, w33] = &table.rev;
    let (w11, w22, w12, w33) = (
        &w11[first..first + len],
        &w22[first..first + len],
        &w12[first..first + len],
        &w33[first..first + len],
    );
    let [mut c11, mut c12b, mut c22, mut c12a, mut c33] = *acc;
    for i in 0..len {
        let [a, b, c] = seg[i];
        c11 += a * w11[i];
        c12b += b * w12[i];
        c22 += b * w22[i];
        c12a += a * w12[i];
        c33 += c * w33[i];
    }
    *acc = [c11, c12b, c22, c12a, c33];
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbi::kernels::{HalfSpaceKernels, SyntheticKernel};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn host() -> ElasticMaterial {
        ElasticMaterial::from_wave_speeds(2670.0, 6000.0, 3464.0).unwrap()
    }

    fn boundary(side: Side, provider: &dyn KernelProvider, cap: Option<usize>) -> SbiBoundary {
        let settings = SbiSettings {
            t_max: 20.0,
            history_cap: cap,
        };
        SbiBoundary::new(side, host(), 8, 4, 100.0, 0.005, provider, &settings, 1000).unwrap()
    }

    #[test]
    fn zero_history_gives_far_field() {
        let mut b = boundary(Side::Upper, &HalfSpaceKernels, None);
        b.set_far_field([1.0, -2.0, 3.0]);
        b.push_history(1, &vec![0.0; 96]).unwrap();
        let mut out = vec![0.0; 96];
        b.traction(&vec![0.0; 96], &mut out).unwrap();
        for t in out.chunks_exact(3) {
            assert_eq!(t, &[1.0, -2.0, 3.0]);
        }
    }

    #[test]
    fn uniform_velocity_damping() {
        let b = boundary(Side::Upper, &HalfSpaceKernels, None);
        let v: Vec<f64> = (0..96).map(|d| [1.0, 1.0, 0.0][d % 3]).collect();
        let mut out = vec![0.0; 96];
        b.traction(&v, &mut out).unwrap();
        let z = host().shear_impedance();
        assert_relative_eq!(out[0], -z, max_relative = 1e-14);
        assert_relative_eq!(z, 9.25e6, max_relative = 1e-3);
        assert_relative_eq!(out[1], -z * 6000.0 / 3464.0, max_relative = 1e-4);
    }

    #[test]
    fn double_push_rejected() {
        let mut b = boundary(Side::Upper, &HalfSpaceKernels, None);
        b.push_history(3, &vec![0.0; 96]).unwrap();
        assert!(matches!(b.push_history(3, &vec![0.0; 96]), Err(Error::DoublePush(3))));
        assert!(b.push_history(4, &vec![0.0; 96]).is_ok());
    }

    #[test]
    fn window_of_one_keeps_current_sample() {
        let mut b = boundary(Side::Upper, &SyntheticKernel, Some(1));
        assert!(b.tables().iter().all(|t| t.window() == 1));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for step in 1..4 {
            let u: Vec<f64> = (0..96).map(|_| rng.gen_range(-1.0..1.0)).collect();
            b.push_history(step, &u).unwrap();
            assert!(b.history_sample(1, 0, 1).is_none());
            let s = b.history_sample(1, 0, 0).unwrap();
            let spec = SpectralPlan::new(8, 4).unwrap().forward_component(&u, 1).unwrap();
            assert!((s[1] - spec[1]).norm() < 1e-12);
        }
    }

    #[test]
    fn history_matches_dense_storage() {
        let mut b = boundary(Side::Lower, &HalfSpaceKernels, None);
        let plan = SpectralPlan::new(8, 4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut dense = Vec::new();
        for step in 0..30 {
            let u: Vec<f64> = (0..96).map(|_| rng.gen_range(-1.0..1.0)).collect();
            dense.push(plan.forward_component(&u, 1).unwrap());
            b.push_history(step, &u).unwrap();
        }
        for lag in 0..30 {
            let stored = b.history_sample(2, 1, lag).unwrap();
            assert!((stored[1] - dense[29 - lag][1 * 8 + 2]).norm() < 1e-12);
        }
    }

    #[test]
    fn tractions_are_linear_and_real() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let hist: Vec<Vec<f64>> = (0..40).map(|_| (0..96).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let hist2: Vec<Vec<f64>> = (0..40).map(|_| (0..96).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let run = |h: &dyn Fn(usize) -> Vec<f64>| {
            let mut b = boundary(Side::Upper, &HalfSpaceKernels, None);
            for step in 0..40 {
                b.push_history(step as u64, &h(step)).unwrap();
            }
            b.nonlocal_term().to_vec()
        };
        let (alpha, beta) = (0.7, -1.3);
        let sa = run(&|s| hist[s].clone());
        let sb = run(&|s| hist2[s].clone());
        let sc = run(&|s| hist[s].iter().zip(&hist2[s]).map(|(x, y)| alpha * x + beta * y).collect());
        let norm = sc.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for i in 0..96 {
            assert!((sc[i] - (alpha * sa[i] + beta * sb[i])).abs() <= 1e-10 * norm);
        }
    }
}
