//! Trilinear 8-node cube element.
//!
//! Local corner `c = a + 2b + 4d` sits at `(a, b, d) * dx` relative to the
//! element's minimum corner, with `a`, `b`, `d` the offsets along `x1`, `x2`,
//! `x3`. Degrees of freedom are ordered `3c + component`.

use crate::material::ElasticMaterial;

pub const CORNERS: usize = 8;
pub const ELEMENT_DOFS: usize = 24;

/// Row-major 24x24 element stiffness matrix.
pub type ElementMatrix = [f64; ELEMENT_DOFS * ELEMENT_DOFS];

pub fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

const GAUSS: f64 = 0.577_350_269_189_625_8;

/// Derivatives of the shape functions with respect to physical coordinates at
/// the reference point `xi` in `[-1, 1]^3`.
fn shape_gradients(xi: [f64; 3], dx: f64) -> [[f64; 3]; CORNERS] {
    let mut g = [[0.0; 3]; CORNERS];
    for (c, grad) in g.iter_mut().enumerate() {
        let s = corner_offset(c).map(|o| if o == 0 { -1.0 } else { 1.0 });
        let f = [
            0.5 * (1.0 + s[0] * xi[0]),
            0.5 * (1.0 + s[1] * xi[1]),
            0.5 * (1.0 + s[2] * xi[2]),
        ];
        // d/dx = (2/dx) d/dxi
        grad[0] = s[0] / dx * f[1] * f[2];
        grad[1] = s[1] / dx * f[0] * f[2];
        grad[2] = s[2] / dx * f[0] * f[1];
    }
    g
}

/// Strain-displacement matrix in Voigt order (11, 22, 33, 23, 13, 12) with
/// engineering shear strains.
fn strain_matrix(grads: &[[f64; 3]; CORNERS]) -> [[f64; ELEMENT_DOFS]; 6] {
    let mut b = [[0.0; ELEMENT_DOFS]; 6];
    for (c, g) in grads.iter().enumerate() {
        let d = 3 * c;
        b[0][d] = g[0];
        b[1][d + 1] = g[1];
        b[2][d + 2] = g[2];
        b[3][d + 1] = g[2];
        b[3][d + 2] = g[1];
        b[4][d] = g[2];
        b[4][d + 2] = g[0];
        b[5][d] = g[1];
        b[5][d + 1] = g[0];
    }
    b
}

fn elasticity(material: &ElasticMaterial) -> [[f64; 6]; 6] {
    let l = material.lambda();
    let m = material.shear_modulus();
    let mut d = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            d[i][j] = l;
        }
        d[i][i] = l + 2.0 * m;
        d[i + 3][i + 3] = m;
    }
    d
}

/// Fully integrated (2x2x2 Gauss) stiffness of a cube element of edge `dx`.
pub fn element_stiffness(material: &ElasticMaterial, dx: f64) -> Box<ElementMatrix> {
    let d = elasticity(material);
    let det_j = (0.5 * dx).powi(3);
    let mut k = Box::new([0.0; ELEMENT_DOFS * ELEMENT_DOFS]);
    for gp in 0..8 {
        let xi = corner_offset(gp).map(|o| if o == 0 { -GAUSS } else { GAUSS });
        let b = strain_matrix(&shape_gradients(xi, dx));
        let mut db = [[0.0; ELEMENT_DOFS]; 6];
        for r in 0..6 {
            for s in 0..6 {
                if d[r][s] != 0.0 {
                    for col in 0..ELEMENT_DOFS {
                        db[r][col] += d[r][s] * b[s][col];
                    }
                }
            }
        }
        for row in 0..ELEMENT_DOFS {
            for r in 0..6 {
                let brow = b[r][row];
                if brow == 0.0 {
                    continue;
                }
                let w = brow * det_j;
                for col in 0..ELEMENT_DOFS {
                    k[row * ELEMENT_DOFS + col] += w * db[r][col];
                }
            }
        }
    }
    k
}

/// Stress (Voigt order, Pa) at the element centroid for element displacements
/// `ue`.
pub fn centroid_stress(material: &ElasticMaterial, dx: f64, ue: &[f64; ELEMENT_DOFS]) -> [f64; 6] {
    let b = strain_matrix(&shape_gradients([0.0; 3], dx));
    let d = elasticity(material);
    let mut eps = [0.0; 6];
    for r in 0..6 {
        eps[r] = (0..ELEMENT_DOFS).map(|c| b[r][c] * ue[c]).sum();
    }
    let mut sig = [0.0; 6];
    for r in 0..6 {
        sig[r] = (0..6).map(|s| d[r][s] * eps[s]).sum();
    }
    sig
}
