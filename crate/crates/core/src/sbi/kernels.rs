//! Convolution kernels of the spectral boundary-integral closure.
//!
//! For a Fourier mode of wavenumber `q` the traction response of a half-space
//! to its surface displacement is written in nondimensional time
//! `T = q cs t` as an instantaneous radiation term plus convolutions
//! `-mu q (H * U)(T)`. The kernels are the inverse Laplace transforms of the
//! dynamic stiffness functions `G(P)` with the radiation term removed. With
//! `kappa = cp / cs`, `a = sqrt(P^2 + kappa^2) / kappa` and
//! `b = sqrt(P^2 + 1)`:
//!
//! ```text
//! G11 = ((kappa^2 + P^2) b + kappa^2 a) / (P^2 + kappa^2 + 1) - P
//! G22 = (kappa^2 (1 + P^2) a + kappa^2 b) / (P^2 + kappa^2 + 1) - kappa P
//! G12 = (kappa^2 a b - kappa^2 - 2 - 2 P^2) / (P^2 + kappa^2 + 1)
//! G33 = b - P
//! ```
//!
//! `11` is the in-plane component along the wavevector, `2` the normal
//! component and `33` the antiplane component. `G12` tends to `kappa - 2` for
//! large `P`, which becomes an impulse at `T = 0`. For a fault plane loaded by
//! its own tangential displacement with free normal motion, the mode II and
//! mode III stiffnesses are `R / (b P^2) - P` with
//! `R = (2 + P^2)^2 - 4 a b`, and `b - P`.
//!
//! `G` is analytic outside the branch cut `P in [-i kappa, i kappa]`, so
//! `H(T) = (1/pi) int_0^kappa Re[dG(y) exp(i y T)] dy` where `dG` is the jump
//! of `G` across the cut at `P = i y`. Across the cut `a` changes sign for
//! `y < kappa` and `b` for `y < 1`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::material::ElasticMaterial;

/// Default truncation horizon in nondimensional time.
pub const DEFAULT_T_MAX: f64 = 100.0;

const TABLE_STEP: f64 = 0.01;
const TABLE_MARGIN: f64 = 8.0;
const NODES_PER_SEGMENT: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// `H11, H22, H12, H33` of a half-space under prescribed surface
    /// displacement.
    HalfSpace,
    /// Mode II and mode III kernels of a fault plane.
    FaultPlane,
}

impl KernelFamily {
    fn count(self) -> usize {
        match self {
            KernelFamily::HalfSpace => 4,
            KernelFamily::FaultPlane => 2,
        }
    }
}

/// Product-integration weights for one mode, indexed by lag (step 0 is the
/// newest sample). All weights are dimensionless.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModeKernels {
    pub h11: Vec<f64>,
    pub h22: Vec<f64>,
    pub h12: Vec<f64>,
    pub h33: Vec<f64>,
}

impl ModeKernels {
    pub fn window(&self) -> usize {
        self.h11.len()
    }
}

/// Source of per-mode convolution weights.
pub trait KernelProvider: Send + Sync {
    fn mode_kernels(&self, q: f64, material: &ElasticMaterial, dt: f64, window: usize) -> Result<ModeKernels>;
}

/// Number of stored lags for a mode: enough to reach `t_max`, capped.
pub fn window_length(q: f64, cs: f64, dt: f64, t_max: f64, cap: usize) -> usize {
    let dtau = q * cs * dt;
    let w = if dtau > 0.0 {
        (t_max / dtau).ceil() as usize + 1
    } else {
        1
    };
    w.clamp(1, cap.max(1))
}

/// Hat-function product-integration weights from the running moments
/// `c0(T) = int_0^T H` and `c1(T) = int_0^T s H(s) ds`. The kernel is
/// truncated after the last stored lag.
pub fn hat_weights(c0: impl Fn(f64) -> f64, c1: impl Fn(f64) -> f64, dtau: f64, window: usize) -> Vec<f64> {
    let m0: Vec<f64> = (0..window).map(|j| c0(j as f64 * dtau)).collect();
    let m1: Vec<f64> = (0..window).map(|j| c1(j as f64 * dtau)).collect();
    let mut w = vec![0.0; window];
    for j in 0..window {
        let tj = j as f64 * dtau;
        if j > 0 {
            let t0 = tj - dtau;
            w[j] += ((m1[j] - m1[j - 1]) - t0 * (m0[j] - m0[j - 1])) / dtau;
        }
        if j + 1 < window {
            let t1 = tj + dtau;
            w[j] += (t1 * (m0[j + 1] - m0[j]) - (m1[j + 1] - m1[j])) / dtau;
        }
    }
    w
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Dynamic stiffness functions (radiation term excluded) at `(P, a, b)`.
fn stiffness(family: KernelFamily, kappa: f64, p: Complex64, a: Complex64, b: Complex64) -> [Complex64; 4] {
    let k2 = kappa * kappa;
    let p2 = p * p;
    match family {
        KernelFamily::HalfSpace => {
            let d = p2 + k2 + 1.0;
            [
                ((p2 + k2) * b + k2 * a) / d,
                (k2 * (p2 + 1.0) * a + k2 * b) / d,
                (k2 * a * b - k2 - 2.0 - 2.0 * p2) / d,
                b,
            ]
        }
        KernelFamily::FaultPlane => {
            let r = (p2 + 2.0) * (p2 + 2.0) - 4.0 * a * b;
            [r / (b * p2), b, Complex64::default(), Complex64::default()]
        }
    }
}

/// Quadrature of the cut integral: nodes `y`, weights and kernel jumps.
struct CutRule {
    y: Vec<f64>,
    w: Vec<f64>,
    jump: Vec<[Complex64; 4]>,
}

impl CutRule {
    fn new(family: KernelFamily, kappa: f64) -> Self {
        let (gx, gw) = gauss_legendre(NODES_PER_SEGMENT);
        let mut rule = CutRule {
            y: Vec::new(),
            w: Vec::new(),
            jump: Vec::new(),
        };
        for (lo, hi) in [(0.0, 1.0), (1.0, kappa)] {
            if hi <= lo {
                continue;
            }
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            for (x, wx) in gx.iter().zip(&gw) {
                // y = mid - half cos(theta), theta in [0, pi]
                let theta = 0.5 * std::f64::consts::PI * (x + 1.0);
                let y = mid - half * theta.cos();
                let wy = wx * 0.5 * std::f64::consts::PI * half * theta.sin();
                rule.y.push(y);
                rule.w.push(wy);
                rule.jump.push(Self::jump_at(family, kappa, y));
            }
        }
        rule
    }

    fn jump_at(family: KernelFamily, kappa: f64, y: f64) -> [Complex64; 4] {
        let p = Complex64::new(0.0, y);
        let ar = Complex64::new((kappa * kappa - y * y).max(0.0).sqrt() / kappa, 0.0);
        let (br, bl) = if y < 1.0 {
            let b = Complex64::new((1.0 - y * y).sqrt(), 0.0);
            (b, -b)
        } else {
            let b = Complex64::new(0.0, (y * y - 1.0).sqrt());
            (b, b)
        };
        let right = stiffness(family, kappa, p, ar, br);
        let left = stiffness(family, kappa, p, -ar, bl);
        [0, 1, 2, 3].map(|k| right[k] - left[k])
    }
}

/// `int_0^1 exp(i x s) ds` and `int_0^1 s exp(i x s) ds`.
fn phase_moments(x: f64, phasor: Complex64) -> (Complex64, Complex64) {
    if x.abs() < 0.2 {
        let ix = Complex64::new(0.0, x);
        let (mut f, mut g) = (Complex64::default(), Complex64::default());
        let mut term = Complex64::new(1.0, 0.0);
        for n in 0..20 {
            f += term / (n + 1) as f64;
            g += term / (n + 2) as f64;
            term = term * ix / (n + 1) as f64;
        }
        (f, g)
    } else {
        let ix = Complex64::new(0.0, x);
        let f = (phasor - 1.0) / ix;
        let g = (phasor * (1.0 - ix) - 1.0) / (x * x);
        (f, g)
    }
}

/// Kernels sampled on a fine uniform grid with their running moments.
#[derive(Debug)]
pub struct MasterTable {
    family: KernelFamily,
    kappa: f64,
    step: f64,
    h: Vec<Vec<f64>>,
    c0: Vec<Vec<f64>>,
    c1: Vec<Vec<f64>>,
}

impl MasterTable {
    pub fn compute(family: KernelFamily, kappa: f64, t_end: f64) -> Self {
        let rule = CutRule::new(family, kappa);
        let nk = family.count();
        let len = (t_end / TABLE_STEP).ceil() as usize + 2;
        let mut h = vec![vec![0.0; len]; nk];
        let mut c0 = vec![vec![0.0; len]; nk];
        let mut c1 = vec![vec![0.0; len]; nk];
        let inv_pi = 1.0 / std::f64::consts::PI;
        for ((&y, &w), jump) in rule.y.iter().zip(&rule.w).zip(&rule.jump) {
            let step_phasor = Complex64::from_polar(1.0, y * TABLE_STEP);
            let mut phasor = Complex64::new(1.0, 0.0);
            for n in 0..len {
                let t = n as f64 * TABLE_STEP;
                if n % 128 == 0 {
                    phasor = Complex64::from_polar(1.0, y * t);
                }
                let (f, g) = phase_moments(y * t, phasor);
                let e0 = f * t;
                let e1 = g * t * t;
                for k in 0..nk {
                    let d = jump[k] * (w * inv_pi);
                    h[k][n] += (d * phasor).re;
                    c0[k][n] += (d * e0).re;
                    c1[k][n] += (d * e1).re;
                }
                phasor *= step_phasor;
            }
        }
        Self {
            family,
            kappa,
            step: TABLE_STEP,
            h,
            c0,
            c1,
        }
    }

    /// Shared table for `(family, kappa)` covering at least `t_end`.
    pub fn shared(family: KernelFamily, kappa: f64, t_end: f64) -> Arc<MasterTable> {
        type Cache = Mutex<HashMap<(KernelFamily, u64), Arc<MasterTable>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let key = (family, kappa.to_bits());
        let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = map.get(&key) {
            if t.t_end() >= t_end {
                return Arc::clone(t);
            }
        }
        let t = Arc::new(Self::compute(family, kappa, t_end));
        map.insert(key, Arc::clone(&t));
        t
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn t_end(&self) -> f64 {
        (self.h[0].len() - 2) as f64 * self.step
    }

    /// Kernel value, by linear interpolation.
    pub fn value(&self, kernel: usize, t: f64) -> f64 {
        let (i, s) = self.locate(t);
        let h = &self.h[kernel];
        h[i] + s * (h[i + 1] - h[i])
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let x = (t / self.step).max(0.0);
        let i = (x.floor() as usize).min(self.h[0].len() - 2);
        (i, x - i as f64)
    }

    fn hermite(&self, v: &[f64], d: &[f64], t: f64, scale_derivative: bool) -> f64 {
        let (i, s) = self.locate(t);
        let hstep = self.step;
        let (d0, d1) = if scale_derivative {
            (d[i] * i as f64 * hstep, d[i + 1] * (i + 1) as f64 * hstep)
        } else {
            (d[i], d[i + 1])
        };
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * v[i]
            + (s3 - 2.0 * s2 + s) * hstep * d0
            + (-2.0 * s3 + 3.0 * s2) * v[i + 1]
            + (s3 - s2) * hstep * d1
    }

    /// `int_0^t H`.
    pub fn moment0(&self, kernel: usize, t: f64) -> f64 {
        self.hermite(&self.c0[kernel], &self.h[kernel], t, false)
    }

    /// `int_0^t s H(s) ds`.
    pub fn moment1(&self, kernel: usize, t: f64) -> f64 {
        self.hermite(&self.c1[kernel], &self.h[kernel], t, true)
    }

    pub fn weights(&self, kernel: usize, dtau: f64, window: usize) -> Vec<f64> {
        hat_weights(|t| self.moment0(kernel, t), |t| self.moment1(kernel, t), dtau, window)
    }
}

/// Evaluates kernel `kernel` of `family` at `t` by direct quadrature of the
/// cut integral.
pub fn kernel_value(family: KernelFamily, kappa: f64, kernel: usize, t: f64) -> f64 {
    let rule = CutRule::new(family, kappa);
    rule.y
        .iter()
        .zip(&rule.w)
        .zip(&rule.jump)
        .map(|((&y, &w), j)| w * (j[kernel] * Complex64::from_polar(1.0, y * t)).re)
        .sum::<f64>()
        / std::f64::consts::PI
}

fn check_mode(q: f64, dt: f64, window: usize) -> Result<()> {
    if !(q.is_finite() && q > 0.0 && dt > 0.0 && window > 0) {
        return Err(Error::MissingKernel(q));
    }
    Ok(())
}

fn table_for(family: KernelFamily, material: &ElasticMaterial, dtau: f64, window: usize, q: f64) -> Result<Arc<MasterTable>> {
    let span = dtau * window as f64;
    let t_end = span.max(DEFAULT_T_MAX) + TABLE_MARGIN;
    if dtau > TABLE_MARGIN {
        return Err(Error::MissingKernel(q));
    }
    let kappa = material.cp() / material.cs();
    Ok(MasterTable::shared(family, kappa, t_end))
}

/// Kernels of an elastic half-space loaded by its surface displacement.
#[derive(Debug, Clone, Copy, Default)]
pub struct HalfSpaceKernels;

impl KernelProvider for HalfSpaceKernels {
    fn mode_kernels(&self, q: f64, material: &ElasticMaterial, dt: f64, window: usize) -> Result<ModeKernels> {
        check_mode(q, dt, window)?;
        let dtau = q * material.cs() * dt;
        let table = table_for(KernelFamily::HalfSpace, material, dtau, window, q)?;
        let mut h12 = table.weights(2, dtau, window);
        h12[0] += table.kappa() - 2.0;
        Ok(ModeKernels {
            h11: table.weights(0, dtau, window),
            h22: table.weights(1, dtau, window),
            h12,
            h33: table.weights(3, dtau, window),
        })
    }
}

/// Mode II (`h11`) and mode III (`h33`) kernels of a planar fault; `h22`
/// and `h12` are zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct FaultPlaneKernels;

impl KernelProvider for FaultPlaneKernels {
    fn mode_kernels(&self, q: f64, material: &ElasticMaterial, dt: f64, window: usize) -> Result<ModeKernels> {
        check_mode(q, dt, window)?;
        let dtau = q * material.cs() * dt;
        let table = table_for(KernelFamily::FaultPlane, material, dtau, window, q)?;
        Ok(ModeKernels {
            h11: table.weights(0, dtau, window),
            h22: vec![0.0; window],
            h12: vec![0.0; window],
            h33: table.weights(1, dtau, window),
        })
    }
}

/// Test double with `H(T) = exp(-T)` on the diagonal and no coupling.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticKernel;

impl SyntheticKernel {
    pub fn weights(dtau: f64, window: usize) -> Vec<f64> {
        hat_weights(|t| 1.0 - (-t).exp(), |t| 1.0 - (1.0 + t) * (-t).exp(), dtau, window)
    }
}

impl KernelProvider for SyntheticKernel {
    fn mode_kernels(&self, q: f64, material: &ElasticMaterial, dt: f64, window: usize) -> Result<ModeKernels> {
        check_mode(q, dt, window)?;
        let w = Self::weights(q * material.cs() * dt, window);
        Ok(ModeKernels {
            h11: w.clone(),
            h22: w.clone(),
            h12: vec![0.0; window],
            h33: w,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// `J1(x)` from its integral representation, evaluated with the
    /// composite trapezoid rule (spectrally accurate for periodic integrands).
    fn bessel_j1(x: f64) -> f64 {
        let n = 2000;
        let h = std::f64::consts::PI / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let t = i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            s += w * (t - x * t.sin()).cos();
        }
        s * h / std::f64::consts::PI
    }

    fn host_kappa() -> f64 {
        6000.0 / 3464.0
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert_relative_eq!(s, 2.0 / 13.0, max_relative = 1e-13);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn antiplane_kernel_is_j1_over_t() {
        let k = host_kappa();
        for t in [0.3, 1.0, 4.0, 17.5, 60.0] {
            let h = kernel_value(KernelFamily::HalfSpace, k, 3, t);
            assert!((h - bessel_j1(t) / t).abs() < 1e-10, "T = {t}: {h}");
        }
        let h0 = kernel_value(KernelFamily::FaultPlane, k, 1, 1e-9);
        assert_relative_eq!(h0, 0.5, max_relative = 1e-8);
    }

    #[test]
    fn initial_values() {
        let k = host_kappa();
        let at0 = |f, i| kernel_value(f, k, i, 0.0);
        assert_relative_eq!(at0(KernelFamily::HalfSpace, 0), k - 0.5, max_relative = 1e-7);
        assert_relative_eq!(at0(KernelFamily::HalfSpace, 1), k * k - 0.5 * k.powi(3), max_relative = 1e-7);
        assert_relative_eq!(at0(KernelFamily::FaultPlane, 0), 3.5 - 4.0 / k, max_relative = 1e-6);
    }

    #[test]
    fn static_limits() {
        let k = host_kappa();
        let table = MasterTable::compute(KernelFamily::HalfSpace, k, 400.0);
        let g_static = 2.0 * k * k / (k * k + 1.0);
        // oscillating tails decay like T^-3/2
        assert_relative_eq!(table.moment0(0, 400.0), g_static, max_relative = 2e-3);
        assert_relative_eq!(table.moment0(1, 400.0), g_static, max_relative = 2e-3);
        assert_relative_eq!(table.moment0(2, 400.0) + k - 2.0, -2.0 / (k * k + 1.0), max_relative = 2e-3);
        assert_relative_eq!(table.moment0(3, 400.0), 1.0, max_relative = 2e-3);
    }

    /// Closed-form stiffness on the positive real axis, radiation term removed.
    fn stiffness_real(family: KernelFamily, k: f64, p: f64) -> [f64; 2] {
        let a = (p * p + k * k).sqrt() / k;
        let b = (p * p + 1.0).sqrt();
        match family {
            KernelFamily::HalfSpace => {
                let d = p * p + k * k + 1.0;
                [((k * k + p * p) * b + k * k * a) / d - p, (k * k * a * b - k * k - 2.0 - 2.0 * p * p) / d - (k - 2.0)]
            }
            KernelFamily::FaultPlane => {
                let r = (p * p + 2.0).powi(2) - 4.0 * a * b;
                [r / (b * p * p) - p, b - p]
            }
        }
    }

    #[test]
    fn laplace_transform_recovers_stiffness() {
        let k = host_kappa();
        for family in [KernelFamily::HalfSpace, KernelFamily::FaultPlane] {
            let table = MasterTable::compute(family, k, 90.0);
            let kernels = match family {
                KernelFamily::HalfSpace => [0, 2],
                KernelFamily::FaultPlane => [0, 1],
            };
            for p in [0.5, 1.0, 2.0] {
                let expect = stiffness_real(family, k, p);
                for (slot, &kernel) in kernels.iter().enumerate() {
                    let h = 0.005;
                    let n = (85.0 / h) as usize;
                    let lap: f64 = (0..=n)
                        .map(|i| {
                            let t = i as f64 * h;
                            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                            w * h * table.value(kernel, t) * (-p * t).exp()
                        })
                        .sum();
                    assert!((lap - expect[slot]).abs() < 1e-4, "{family:?} kernel {kernel} P = {p}: {lap} vs {}", expect[slot]);
                }
            }
        }
    }

    #[test]
    fn moments_match_table_integration() {
        let table = MasterTable::compute(KernelFamily::HalfSpace, host_kappa(), 20.0);
        for kernel in 0..4 {
            // trapezoid integration of the sampled kernel
            let (mut c0, mut c1) = (0.0, 0.0);
            let n = 1500;
            for i in 0..n {
                let (a, b) = (i as f64 * 0.01, (i + 1) as f64 * 0.01);
                let (ha, hb) = (table.value(kernel, a), table.value(kernel, b));
                c0 += 0.005 * (ha + hb);
                c1 += 0.005 * (a * ha + b * hb);
            }
            assert!((table.moment0(kernel, 15.0) - c0).abs() < 1e-4);
            assert!((table.moment1(kernel, 15.0) - c1).abs() < 1e-3);
        }
    }

    #[test]
    fn synthetic_weights_integrate_linear_history_exactly() {
        // U(T) = T convolved with exp(-T) is T - 1 + exp(-T)
        let dtau = 0.05;
        let n = 200;
        let w = SyntheticKernel::weights(dtau, n + 1);
        let conv: f64 = (0..=n).map(|j| w[j] * (n - j) as f64 * dtau).sum();
        let t = n as f64 * dtau;
        assert_relative_eq!(conv, t - 1.0 + (-t).exp(), max_relative = 1e-12);
    }

    #[test]
    fn window_lengths() {
        assert_eq!(window_length(1.0, 1.0, 1.0, 100.0, 1000), 101);
        assert_eq!(window_length(1.0, 1.0, 1.0, 100.0, 1), 1);
        assert_eq!(window_length(0.5, 2.0, 0.1, 10.0, 1000), 101);
    }
}
