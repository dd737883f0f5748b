//! Two-dimensional discrete Fourier transforms on a periodic boundary plane.
//!
//! Fields are stored `[k][i]` with `i` along `x1` (length `N1`) and `k` along
//! `x3` (length `N3`), the layout of a node plane of the strip. The forward
//! transform uses `exp(-i (k x1 + m x3))`; the inverse includes the `1 / (N1 N3)`
//! normalisation.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct SpectralPlan {
    n1: usize,
    n3: usize,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd3: Arc<dyn Fft<f64>>,
    inv3: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan")
            .field("n1", &self.n1)
            .field("n3", &self.n3)
            .finish()
    }
}

impl SpectralPlan {
    pub fn new(n1: usize, n3: usize) -> Result<Self> {
        if n1 == 0 || n3 == 0 {
            return Err(Error::Grid("spectral plane needs at least one point per axis".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n1,
            n3,
            fwd1: planner.plan_fft_forward(n1),
            inv1: planner.plan_fft_inverse(n1),
            fwd3: planner.plan_fft_forward(n3),
            inv3: planner.plan_fft_inverse(n3),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n1, self.n3)
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n3
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                got: len,
            });
        }
        Ok(())
    }

    fn transform(&self, data: &mut [Complex64], rows: &dyn Fft<f64>, cols: &dyn Fft<f64>) {
        let (n1, n3) = (self.n1, self.n3);
        let mut scratch = vec![Complex64::default(); rows.get_inplace_scratch_len().max(cols.get_inplace_scratch_len())];
        rows.process_with_scratch(data, &mut scratch);
        if n3 > 1 {
            let mut t = vec![Complex64::default(); n1 * n3];
            for k in 0..n3 {
                for i in 0..n1 {
                    t[i * n3 + k] = data[k * n1 + i];
                }
            }
            cols.process_with_scratch(&mut t, &mut scratch);
            for k in 0..n3 {
                for i in 0..n1 {
                    data[k * n1 + i] = t[i * n3 + k];
                }
            }
        }
    }

    /// Forward transform of a real field.
    pub fn forward(&self, field: &[f64]) -> Result<Vec<Complex64>> {
        self.check(field.len())?;
        let mut data: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut data, self.fwd1.as_ref(), self.fwd3.as_ref());
        Ok(data)
    }

    /// Forward transform of one component of an interleaved 3-vector field.
    pub fn forward_component(&self, field: &[f64], component: usize) -> Result<Vec<Complex64>> {
        self.check(field.len() / 3)?;
        let mut data: Vec<Complex64> = field
            .chunks_exact(3)
            .map(|v| Complex64::new(v[component], 0.0))
            .collect();
        self.transform(&mut data, self.fwd1.as_ref(), self.fwd3.as_ref());
        Ok(data)
    }

    /// Inverse transform in place; the caller keeps the real part.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) -> Result<()> {
        self.check(data.len())?;
        self.transform(data, self.inv1.as_ref(), self.inv3.as_ref());
        let scale = 1.0 / self.len() as f64;
        for x in data.iter_mut() {
            *x *= scale;
        }
        Ok(())
    }

    /// Inverse transform returning the real part.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Result<Vec<f64>> {
        let mut data = spectrum.to_vec();
        self.inverse_in_place(&mut data)?;
        Ok(data.into_iter().map(|c| c.re).collect())
    }

    /// Signed wavenumber index of position `p` on an axis of length `n`.
    pub fn signed_index(p: usize, n: usize) -> i64 {
        if 2 * p <= n {
            p as i64
        } else {
            p as i64 - n as i64
        }
    }

    /// Position `(p, r)` of the mode conjugate to `(p, r)`.
    pub fn conjugate(&self, p: usize, r: usize) -> (usize, usize) {
        ((self.n1 - p) % self.n1, (self.n3 - r) % self.n3)
    }

    /// Modes that determine a Hermitian spectrum: every mode whose conjugate
    /// is not listed before it. Returned as `(p, r)` pairs.
    pub fn independent_modes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..self.n3 {
            let rc = (self.n3 - r) % self.n3;
            if rc < r {
                continue;
            }
            for p in 0..self.n1 {
                let pc = (self.n1 - p) % self.n1;
                if rc == r && pc < p {
                    continue;
                }
                out.push((p, r));
            }
        }
        out
    }
}

/// Physical wavevector `(k, m)` of mode `(p, r)` on a plane of spacing `dx`.
pub fn wavevector(p: usize, r: usize, n1: usize, n3: usize, dx: f64) -> (f64, f64) {
    let two_pi = 2.0 * std::f64::consts::PI;
    (
        two_pi * SpectralPlan::signed_index(p, n1) as f64 / (n1 as f64 * dx),
        two_pi * SpectralPlan::signed_index(r, n3) as f64 / (n3 as f64 * dx),
    )
}

pub fn spectral_forward(plan: &SpectralPlan, field: &[f64]) -> Result<Vec<Complex64>> {
    plan.forward(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_field_has_only_mean_mode() {
        let plan = SpectralPlan::new(8, 4).unwrap();
        let s = plan.forward(&vec![2.5; 32]).unwrap();
        assert!((s[0].re - 80.0).abs() < 1e-12);
        assert!(s[1..].iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn sine_along_x1_is_a_conjugate_pair() {
        let (n1, n3) = (16, 3);
        let plan = SpectralPlan::new(n1, n3).unwrap();
        let field: Vec<f64> = (0..n1 * n3)
            .map(|idx| (2.0 * std::f64::consts::PI * 3.0 * (idx % n1) as f64 / n1 as f64).sin())
            .collect();
        let s = plan.forward(&field).unwrap();
        for (idx, c) in s.iter().enumerate() {
            let (p, r) = (idx % n1, idx / n1);
            if r == 0 && (p == 3 || p == n1 - 3) {
                assert!((c.norm() - 24.0).abs() < 1e-10);
            } else {
                assert!(c.norm() < 1e-10);
            }
        }
        assert!((s[3] - s[n1 - 3].conj()).norm() < 1e-12);
    }

    #[test]
    fn random_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for (n1, n3) in [(1, 1), (6, 10), (15, 8), (32, 1)] {
            let plan = SpectralPlan::new(n1, n3).unwrap();
            let field: Vec<f64> = (0..n1 * n3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let back = plan.inverse(&plan.forward(&field).unwrap()).unwrap();
            let norm: f64 = field.iter().map(|x| x * x).sum::<f64>().sqrt();
            let err: f64 = field.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(err <= 1e-12 * norm);
        }
    }

    #[test]
    fn size_mismatch_rejected() {
        let plan = SpectralPlan::new(4, 4).unwrap();
        assert!(matches!(plan.forward(&[0.0; 15]), Err(Error::SizeMismatch { expected: 16, got: 15 })));
    }

    #[test]
    fn independent_modes_cover_spectrum_once() {
        for (n1, n3) in [(1, 1), (4, 4), (5, 6), (8, 1), (6, 9)] {
            let plan = SpectralPlan::new(n1, n3).unwrap();
            let modes = plan.independent_modes();
            let mut seen = vec![0; n1 * n3];
            for &(p, r) in &modes {
                seen[r * n1 + p] += 1;
                let (pc, rc) = plan.conjugate(p, r);
                if (pc, rc) != (p, r) {
                    seen[rc * n1 + pc] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1), "{n1}x{n3}");
        }
    }
}
