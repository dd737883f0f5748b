//! Dense reference for the FE operators: the trilinear hexahedron stiffness
//! integrated from shape-function gradients with 2x2x2 Gauss points, row-sum
//! lumped mass, and a velocity Verlet step on the assembled matrices.

use fesbi::coupler::HybridSolver;
use fesbi::fem::{cfl_timestep, FeModel, Lateral, DEFAULT_CFL_SAFETY};
use fesbi::mesh::{assign_regions, build_grid_at, RegionSpec};
use nalgebra::{DMatrix, DVector, SMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Hex = SMatrix<f64, 24, 24>;

fn corner_bits(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// Stiffness of a cube of side `dx`, corners ordered by the bits of the
/// corner index (`x1` fastest).
pub fn hex_stiffness(lambda: f64, mu: f64, dx: f64) -> Hex {
    let mut d = SMatrix::<f64, 6, 6>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            d[(i, j)] = lambda;
        }
        d[(i, i)] += 2.0 * mu;
        d[(i + 3, i + 3)] = mu;
    }
    let g = 1.0 / 3.0_f64.sqrt();
    let jac = 0.5 * dx;
    let mut k = Hex::zeros();
    for gp in 0..8 {
        let xi = corner_bits(gp).map(|b| if b == 1 { g } else { -g });
        let mut b = SMatrix::<f64, 6, 24>::zeros();
        for c in 0..8 {
            let s = corner_bits(c).map(|b| 2.0 * b as f64 - 1.0);
            let f = |a: usize| 1.0 + s[a] * xi[a];
            let grad = [
                s[0] * f(1) * f(2) / 8.0 / jac,
                s[1] * f(0) * f(2) / 8.0 / jac,
                s[2] * f(0) * f(1) / 8.0 / jac,
            ];
            let col = 3 * c;
            b[(0, col)] = grad[0];
            b[(1, col + 1)] = grad[1];
            b[(2, col + 2)] = grad[2];
            b[(3, col + 1)] = grad[2];
            b[(3, col + 2)] = grad[1];
            b[(4, col)] = grad[2];
            b[(4, col + 2)] = grad[0];
            b[(5, col)] = grad[1];
            b[(5, col + 1)] = grad[0];
        }
        k += b.transpose() * d * b * jac.powi(3);
    }
    k
}

/// Global node of element corner `c` for element `(i, j, k)`, resolving
/// periodic wrap and the lower copies of split planes.
fn corner_node(model: &FeModel, e: [usize; 3], c: usize) -> usize {
    let layout = model.layout();
    let o = corner_bits(c);
    let (i, j, k) = (e[0] + o[0], e[1] + o[1], e[2] + o[2]);
    if o[1] == 1 {
        if let Some(s) = layout.split_planes().iter().position(|&p| p == j) {
            return layout.lower_node(s, i, k);
        }
    }
    layout.node(i, j, k)
}

pub struct DenseModel {
    pub k: DMatrix<f64>,
    pub mass: DVector<f64>,
}

pub fn assemble(model: &FeModel) -> DenseModel {
    let grid = model.grid();
    let [n1, n2, n3] = grid.n();
    let dx = grid.dx();
    let dofs = model.dof_count();
    if model.layout().lateral() == Lateral::Periodic {
        assert!(n1 >= 2 && n3 >= 2, "periodic oracle needs two elements per lateral direction");
    }
    let mut k = DMatrix::zeros(dofs, dofs);
    let mut mass = DVector::zeros(dofs);
    for ek in 0..n3 {
        for ej in 0..n2 {
            for ei in 0..n1 {
                let mat = model.materials()[grid.element_material(grid.element_index(ei, ej, ek))];
                let ke = hex_stiffness(mat.lambda(), mat.shear_modulus(), dx);
                let nodes: Vec<usize> = (0..8).map(|c| corner_node(model, [ei, ej, ek], c)).collect();
                for a in 0..24 {
                    let ra = 3 * nodes[a / 3] + a % 3;
                    mass[ra] += mat.density() * dx.powi(3) / 8.0;
                    for b in 0..24 {
                        k[(ra, 3 * nodes[b / 3] + b % 3)] += ke[(a, b)];
                    }
                }
            }
        }
    }
    DenseModel { k, mass }
}

impl DenseModel {
    pub fn accelerations(&self, u: &DVector<f64>) -> DVector<f64> {
        -(&self.k * u).component_div(&self.mass)
    }

    /// One velocity Verlet step from `(u, v, a)`.
    pub fn step(
        &self,
        u: &DVector<f64>,
        v: &DVector<f64>,
        a: &DVector<f64>,
        dt: f64,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let u1 = u + v * dt + a * (0.5 * dt * dt);
        let a1 = self.accelerations(&u1);
        let v1 = v + (a + &a1) * (0.5 * dt);
        (u1, v1, a1)
    }
}

/// Largest absolute difference divided by the largest reference magnitude.
pub fn relative_max(test: &[f64], reference: &[f64]) -> f64 {
    let peak = reference.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let diff = test.iter().zip(reference).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    diff / peak
}

/// Small meshes covering both lateral treatments, a split plane and a
/// material contrast.
pub fn oracle_models() -> Vec<FeModel> {
    let host = super::host_rock();
    let slow = host.with_speed_factor(0.7).unwrap();
    let layered = {
        let g = build_grid_at([400.0, 400.0, 400.0], 100.0, [0.0; 3]).unwrap();
        let r = RegionSpec {
            min: [0.0, 100.0, 0.0],
            max: [200.0, 300.0, 400.0],
            material: 1,
        };
        let g = assign_regions(g, &[r], &[host, slow]).unwrap();
        FeModel::new(g, &[host, slow], &[2]).unwrap()
    };
    let open = {
        let g = build_grid_at([300.0, 200.0, 400.0], 100.0, [-150.0, 0.0, 0.0]).unwrap();
        FeModel::with_lateral(g, &[host], &[], Lateral::Open).unwrap()
    };
    vec![layered, open]
}

#[derive(Debug, Clone, Copy)]
pub struct OracleErrors {
    pub mass: f64,
    pub force: f64,
    pub step: f64,
}

/// Compares the matrix-free operators and one solver step against the
/// dense reference on a random state.
pub fn oracle_errors(model: FeModel, seed: u64) -> OracleErrors {
    let dense = assemble(&model);
    let n = model.dof_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = DVector::from_fn(n, |_, _| rng.gen_range(-1e-2..1e-2));
    let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));

    let lumped: Vec<f64> = model.mass().node_mass().iter().flat_map(|&m| [m; 3]).collect();
    let mass = relative_max(&lumped, dense.mass.as_slice());

    let mut f = vec![0.0; n];
    model.stiffness().apply(u.as_slice(), &mut f);
    let force = relative_max(&f, (&dense.k * &u).as_slice());

    let dt = cfl_timestep(model.grid().dx(), model.materials(), DEFAULT_CFL_SAFETY).unwrap();
    let a = dense.accelerations(&u);
    let (u1, v1, a1) = dense.step(&u, &v, &a, dt);
    let mut solver = HybridSolver::new(model, Vec::new(), Vec::new(), dt).unwrap();
    let state = solver.state_mut();
    state.u.copy_from_slice(u.as_slice());
    state.v.copy_from_slice(v.as_slice());
    state.a.copy_from_slice(a.as_slice());
    solver.step().unwrap();
    let s = solver.state();
    let step = relative_max(&s.u, u1.as_slice())
        .max(relative_max(&s.v, v1.as_slice()))
        .max(relative_max(&s.a, a1.as_slice()));
    OracleErrors { mass, force, step }
}
