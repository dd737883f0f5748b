//! Static surface response of an elastic half-space to a single Fourier mode,
//! computed by finite differences in depth.
//!
//! For `u = U(y) exp(i k x1)` the static Navier equations reduce to a pair of
//! coupled ODEs in the depth coordinate `z = dir * x2 >= 0`. They are solved
//! on `[0, L]` with `U(0)` prescribed and `U(L) = 0` using a block tridiagonal
//! elimination.

use num_complex::Complex64;

type C2 = [Complex64; 2];
type M2 = [[Complex64; 2]; 2];

fn mul(a: &M2, b: &M2) -> M2 {
    let mut out = [[Complex64::default(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn mulv(a: &M2, v: &C2) -> C2 {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

fn inv(a: &M2) -> M2 {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

fn sub(a: &M2, b: &M2) -> M2 {
    [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]
}

/// Traction exerted on the strip by the half-space for the surface
/// amplitude `u0 = (U1, U2)` of the mode `exp(i k x1)`. `dir` is `+1` for a
/// half-space above the plane and `-1` below it.
pub fn static_traction(lambda: f64, mu: f64, k: f64, dir: f64, u0: C2) -> C2 {
    let n = 6000;
    let depth = 30.0 / k;
    let h = depth / n as f64;
    let c = Complex64::new(0.0, (lambda + mu) * k * dir);
    let d = [mu, lambda + 2.0 * mu];
    let e = [(lambda + 2.0 * mu) * k * k, mu * k * k];
    let zero = Complex64::default();
    let re = |x: f64| Complex64::new(x, 0.0);
    let lower: M2 = [[re(d[0] / (h * h)), -c / (2.0 * h)], [-c / (2.0 * h), re(d[1] / (h * h))]];
    let upper: M2 = [[re(d[0] / (h * h)), c / (2.0 * h)], [c / (2.0 * h), re(d[1] / (h * h))]];
    let diag: M2 = [
        [re(-2.0 * d[0] / (h * h) - e[0]), zero],
        [zero, re(-2.0 * d[1] / (h * h) - e[1])],
    ];
    // Unknowns U_1 .. U_{n-1}; U_0 = u0 enters the first right-hand side.
    let m = n - 1;
    let mut cprime: Vec<M2> = Vec::with_capacity(m);
    let mut dprime: Vec<C2> = Vec::with_capacity(m);
    for j in 0..m {
        let rhs = if j == 0 {
            let t = mulv(&lower, &u0);
            [-t[0], -t[1]]
        } else {
            [zero, zero]
        };
        let (b, r) = if j == 0 {
            (diag, rhs)
        } else {
            let b = sub(&diag, &mul(&lower, &cprime[j - 1]));
            let t = mulv(&lower, &dprime[j - 1]);
            (b, [rhs[0] - t[0], rhs[1] - t[1]])
        };
        let binv = inv(&b);
        cprime.push(mul(&binv, &upper));
        dprime.push(mulv(&binv, &r));
    }
    let mut sol = vec![[zero, zero]; m];
    sol[m - 1] = dprime[m - 1];
    for j in (0..m - 1).rev() {
        let t = mulv(&cprime[j], &sol[j + 1]);
        sol[j] = [dprime[j][0] - t[0], dprime[j][1] - t[1]];
    }
    let deriv = |i: usize| (-3.0 * u0[i] + 4.0 * sol[0][i] - sol[1][i]) / (2.0 * h);
    let ik = Complex64::new(0.0, k);
    let s12 = (deriv(0) * dir + ik * u0[1]) * mu;
    let s22 = deriv(1) * dir * (lambda + 2.0 * mu) + ik * u0[0] * lambda;
    [s12 * dir, s22 * dir]
}

/// Antiplane counterpart: traction on the strip for `U3 exp(i k x1)`.
pub fn static_antiplane(mu: f64, k: f64, u3: Complex64) -> Complex64 {
    -u3 * mu * k
}
