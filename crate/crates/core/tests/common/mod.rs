#![allow(dead_code)]

pub mod absorption;
pub mod fe_oracle;
pub mod stick;
pub mod static_oracle;

use fesbi::material::ElasticMaterial;
use fesbi::sbi::boundary::{SbiBoundary, SbiSettings, Side};
use fesbi::sbi::kernels::HalfSpaceKernels;
use num_complex::Complex64;

pub fn host_rock() -> ElasticMaterial {
    ElasticMaterial::from_wave_speeds(2670.0, 6000.0, 3464.0).unwrap()
}

/// Holds `A sin(k x1) e_c` on an SBI plane until the kernels have fully
/// decayed and returns the largest deviation of the nonlocal traction from
/// the static half-space response, relative to the largest static traction.
pub fn static_hold_error(side: Side, component: usize, mode: usize) -> f64 {
    let material = host_rock();
    let (n1, n3, dx) = (32, 2, 100.0);
    let dt = 0.4 * dx / material.cp();
    let k = 2.0 * std::f64::consts::PI * mode as f64 / (n1 as f64 * dx);
    let amplitude = 0.01;
    let settings = SbiSettings::default();
    let mut boundary =
        SbiBoundary::new(side, material, n1, n3, dx, dt, &HalfSpaceKernels, &settings, usize::MAX).unwrap();
    let mut u = vec![0.0; 3 * n1 * n3];
    for kk in 0..n3 {
        for i in 0..n1 {
            u[3 * (kk * n1 + i) + component] = amplitude * (k * i as f64 * dx).sin();
        }
    }
    let window = boundary.tables().iter().map(|t| t.window()).max().unwrap();
    for step in 0..window as u64 + 10 {
        boundary.push_history(step, &u).unwrap();
    }
    let s = boundary.nonlocal_term();

    // sin(k x) = Re[-i exp(i k x)]
    let amp = Complex64::new(0.0, -amplitude);
    let dir = side.sign();
    let (lambda, mu) = (material.lambda(), material.shear_modulus());
    let expected: [Complex64; 3] = match component {
        0 => {
            let t = static_oracle::static_traction(lambda, mu, k, dir, [amp, Complex64::default()]);
            [t[0], t[1], Complex64::default()]
        }
        1 => {
            let t = static_oracle::static_traction(lambda, mu, k, dir, [Complex64::default(), amp]);
            [t[0], t[1], Complex64::default()]
        }
        _ => [Complex64::default(), Complex64::default(), static_oracle::static_antiplane(mu, k, amp)],
    };
    let mut peak: f64 = 0.0;
    let mut err: f64 = 0.0;
    for kk in 0..n3 {
        for i in 0..n1 {
            let phase = Complex64::from_polar(1.0, k * i as f64 * dx);
            for c in 0..3 {
                let want = (expected[c] * phase).re;
                let got = s[3 * (kk * n1 + i) + c];
                peak = peak.max(want.abs());
                err = err.max((got - want).abs());
            }
        }
    }
    err / peak
}
