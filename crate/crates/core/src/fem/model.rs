//! Finite-element discretisation of the strip.
//!
//! With periodic lateral faces the solver identifies the lateral images of the
//! geometric grid, so a node plane `j` holds `N1 * N3` nodes stored
//! contiguously in `[k][i]` order. Node
//! planes listed as split planes get a second copy of each node for the side
//! below the plane; these copies follow the regular nodes.

use rayon::prelude::*;

use super::element::{centroid_stress, corner_offset, element_stiffness, ElementMatrix, CORNERS, ELEMENT_DOFS};
use crate::error::{Error, Result};
use crate::material::ElasticMaterial;
use crate::mesh::StructuredGrid;

/// Treatment of the strip faces normal to `x1` and `x3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Lateral {
    /// Opposite faces are identified; required for spectral boundaries.
    #[default]
    Periodic,
    /// Traction-free faces with their own nodes.
    Open,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofLayout {
    n: [usize; 3],
    /// Nodes per plane along `x1` and `x3`.
    pdim: [usize; 2],
    lateral: Lateral,
    dx: f64,
    origin: [f64; 3],
    split_planes: Vec<usize>,
}

impl DofLayout {
    pub fn new(grid: &StructuredGrid, split_planes: &[usize], lateral: Lateral) -> Result<Self> {
        let n = grid.n();
        let mut planes = split_planes.to_vec();
        planes.sort_unstable();
        planes.dedup();
        if let Some(&bad) = planes.iter().find(|&&j| j == 0 || j >= n[1]) {
            return Err(Error::Fault(format!(
                "split plane {bad} must be an interior node plane (1..{})",
                n[1]
            )));
        }
        let pdim = match lateral {
            Lateral::Periodic => [n[0], n[2]],
            Lateral::Open => [n[0] + 1, n[2] + 1],
        };
        Ok(Self {
            n,
            pdim,
            lateral,
            dx: grid.dx(),
            origin: grid.origin(),
            split_planes: planes,
        })
    }

    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn lateral(&self) -> Lateral {
        self.lateral
    }

    /// Nodes per plane along `x1` and `x3`.
    pub fn plane_dims(&self) -> [usize; 2] {
        self.pdim
    }

    pub fn plane_len(&self) -> usize {
        self.pdim[0] * self.pdim[1]
    }

    pub fn node_planes(&self) -> usize {
        self.n[1] + 1
    }

    fn base_count(&self) -> usize {
        self.node_planes() * self.plane_len()
    }

    pub fn node_count(&self) -> usize {
        self.base_count() + self.split_planes.len() * self.plane_len()
    }

    pub fn dof_count(&self) -> usize {
        3 * self.node_count()
    }

    pub fn split_planes(&self) -> &[usize] {
        &self.split_planes
    }

    /// Node at lattice position `(i, j, k)`, with `i` and `k` wrapped when
    /// periodic. On a split plane this is the upper-side node.
    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        let (i, k) = self.wrap(i, k);
        (j * self.pdim[1] + k) * self.pdim[0] + i
    }

    fn wrap(&self, i: usize, k: usize) -> (usize, usize) {
        debug_assert!(i <= self.n[0] && k <= self.n[2]);
        (i % self.pdim[0], k % self.pdim[1])
    }

    /// Lower-side copy of a node on the split plane with index `s` in
    /// [`split_planes`](Self::split_planes).
    pub fn lower_node(&self, s: usize, i: usize, k: usize) -> usize {
        let (i, k) = self.wrap(i, k);
        self.base_count() + s * self.plane_len() + k * self.pdim[0] + i
    }

    /// Contiguous node range of plane `j` (upper side on split planes).
    pub fn plane(&self, j: usize) -> std::ops::Range<usize> {
        let start = j * self.plane_len();
        start..start + self.plane_len()
    }

    /// Contiguous node range of the lower copies of split plane `s`.
    pub fn lower_plane(&self, s: usize) -> std::ops::Range<usize> {
        let start = self.base_count() + s * self.plane_len();
        start..start + self.plane_len()
    }

    pub fn split_index(&self, j: usize) -> Option<usize> {
        self.split_planes.iter().position(|&p| p == j)
    }

    /// Lattice position `(i, j, k)` of a node; lower copies report their
    /// plane.
    pub fn node_ijk(&self, node: usize) -> [usize; 3] {
        let pl = self.plane_len();
        let (j, r) = if node < self.base_count() {
            (node / pl, node % pl)
        } else {
            let s = (node - self.base_count()) / pl;
            (self.split_planes[s], (node - self.base_count()) % pl)
        };
        [r % self.pdim[0], j, r / self.pdim[0]]
    }

    pub fn is_lower_copy(&self, node: usize) -> bool {
        node >= self.base_count()
    }

    pub fn node_coords(&self, node: usize) -> [f64; 3] {
        let [i, j, k] = self.node_ijk(node);
        [
            self.origin[0] + i as f64 * self.dx,
            self.origin[1] + j as f64 * self.dx,
            self.origin[2] + k as f64 * self.dx,
        ]
    }

    /// Nodes of element `(i, j, k)` in local corner order.
    pub fn element_nodes(&self, i: usize, j: usize, k: usize) -> [usize; CORNERS] {
        let below_split = self.split_index(j + 1);
        let mut nodes = [0; CORNERS];
        for (c, node) in nodes.iter_mut().enumerate() {
            let [a, b, d] = corner_offset(c);
            *node = match (b, below_split) {
                (1, Some(s)) => self.lower_node(s, i + a, k + d),
                _ => self.node(i + a, j + b, k + d),
            };
        }
        nodes
    }
}

/// Lumped (diagonal) mass, one entry per node.
#[derive(Debug, Clone, PartialEq)]
pub struct LumpedMass {
    mass: Vec<f64>,
    inverse: Vec<f64>,
}

impl LumpedMass {
    pub fn node_mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn inverse(&self) -> &[f64] {
        &self.inverse
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// `out = M^-1 r` for a 3-component-per-node vector.
    pub fn solve(&self, r: &[f64], out: &mut [f64]) {
        for ((o, r), inv) in out.chunks_exact_mut(3).zip(r.chunks_exact(3)).zip(&self.inverse) {
            o[0] = r[0] * inv;
            o[1] = r[1] * inv;
            o[2] = r[2] * inv;
        }
    }
}

/// Matrix-free global stiffness built from one element template per material.
#[derive(Debug, Clone)]
pub struct StiffnessOperator {
    templates: Vec<Box<ElementMatrix>>,
    template_of: Vec<u16>,
    connectivity: Vec<[u32; CORNERS]>,
    adjacency_start: Vec<u32>,
    /// `element * 8 + corner`, grouped by node in ascending element order.
    adjacency: Vec<u32>,
}

const NODE_CHUNK: usize = 2048;

impl StiffnessOperator {
    pub fn element_count(&self) -> usize {
        self.connectivity.len()
    }

    pub fn element_nodes(&self, e: usize) -> [usize; CORNERS] {
        self.connectivity[e].map(|n| n as usize)
    }

    pub fn element_matrix(&self, e: usize) -> &ElementMatrix {
        &self.templates[self.template_of[e] as usize]
    }

    /// `out = K u`. Each node gathers the contributions of its elements in a
    /// fixed order, so the result does not depend on the thread count.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), out.len());
        out.par_chunks_mut(3 * NODE_CHUNK)
            .enumerate()
            .for_each(|(chunk, block)| {
                let first = chunk * NODE_CHUNK;
                for (local, f) in block.chunks_exact_mut(3).enumerate() {
                    self.node_force(first + local, u, f);
                }
            });
    }

    fn node_force(&self, node: usize, u: &[f64], f: &mut [f64]) {
        let (mut f0, mut f1, mut f2) = (0.0, 0.0, 0.0);
        let range = self.adjacency_start[node] as usize..self.adjacency_start[node + 1] as usize;
        for &packed in &self.adjacency[range] {
            let e = (packed / CORNERS as u32) as usize;
            let c = (packed % CORNERS as u32) as usize;
            let k = &self.templates[self.template_of[e] as usize];
            let rows = &k[3 * c * ELEMENT_DOFS..(3 * c + 3) * ELEMENT_DOFS];
            for (corner, &n) in self.connectivity[e].iter().enumerate() {
                let n = 3 * n as usize;
                let (u0, u1, u2) = (u[n], u[n + 1], u[n + 2]);
                let col = 3 * corner;
                f0 += rows[col] * u0 + rows[col + 1] * u1 + rows[col + 2] * u2;
                f1 += rows[ELEMENT_DOFS + col] * u0 + rows[ELEMENT_DOFS + col + 1] * u1 + rows[ELEMENT_DOFS + col + 2] * u2;
                f2 += rows[2 * ELEMENT_DOFS + col] * u0
                    + rows[2 * ELEMENT_DOFS + col + 1] * u1
                    + rows[2 * ELEMENT_DOFS + col + 2] * u2;
            }
        }
        f[0] = f0;
        f[1] = f1;
        f[2] = f2;
    }

    /// Strain energy `u^T K u / 2`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let mut ku = vec![0.0; u.len()];
        self.apply(u, &mut ku);
        0.5 * dot(u, &ku)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Finite-element model of the strip: layout, stiffness and mass.
#[derive(Debug, Clone)]
pub struct FeModel {
    grid: StructuredGrid,
    layout: DofLayout,
    materials: Vec<ElasticMaterial>,
    stiffness: StiffnessOperator,
    mass: LumpedMass,
}

impl FeModel {
    /// Periodic model, the configuration used with spectral boundaries.
    pub fn new(grid: StructuredGrid, materials: &[ElasticMaterial], split_planes: &[usize]) -> Result<Self> {
        Self::with_lateral(grid, materials, split_planes, Lateral::Periodic)
    }

    pub fn with_lateral(
        grid: StructuredGrid,
        materials: &[ElasticMaterial],
        split_planes: &[usize],
        lateral: Lateral,
    ) -> Result<Self> {
        if let Some(&bad) = grid.element_materials().iter().find(|&&m| m >= materials.len()) {
            return Err(Error::Grid(format!("element material {bad} is not defined")));
        }
        if materials.len() > u16::MAX as usize {
            return Err(Error::Grid("too many materials".into()));
        }
        let layout = DofLayout::new(&grid, split_planes, lateral)?;
        if layout.node_count() >= (u32::MAX / CORNERS as u32) as usize {
            return Err(Error::Grid("mesh too large for 32-bit indexing".into()));
        }
        let stiffness = build_stiffness(&grid, &layout, materials);
        let mass = assemble_lumped_mass(&grid, &layout, &stiffness, materials);
        Ok(Self {
            grid,
            layout,
            materials: materials.to_vec(),
            stiffness,
            mass,
        })
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    pub fn layout(&self) -> &DofLayout {
        &self.layout
    }

    pub fn materials(&self) -> &[ElasticMaterial] {
        &self.materials
    }

    pub fn stiffness(&self) -> &StiffnessOperator {
        &self.stiffness
    }

    pub fn mass(&self) -> &LumpedMass {
        &self.mass
    }

    pub fn dof_count(&self) -> usize {
        self.layout.dof_count()
    }

    /// Centroid stress of element `e`.
    pub fn element_stress(&self, e: usize, u: &[f64]) -> [f64; 6] {
        let mut ue = [0.0; ELEMENT_DOFS];
        for (c, n) in self.stiffness.element_nodes(e).into_iter().enumerate() {
            ue[3 * c..3 * c + 3].copy_from_slice(&u[3 * n..3 * n + 3]);
        }
        let mat = &self.materials[self.grid.element_material(e)];
        centroid_stress(mat, self.grid.dx(), &ue)
    }
}

fn build_stiffness(grid: &StructuredGrid, layout: &DofLayout, materials: &[ElasticMaterial]) -> StiffnessOperator {
    let templates: Vec<_> = materials.iter().map(|m| element_stiffness(m, grid.dx())).collect();
    let n_el = grid.element_count();
    let mut connectivity = Vec::with_capacity(n_el);
    let mut template_of = Vec::with_capacity(n_el);
    for e in 0..n_el {
        let [i, j, k] = grid.element_ijk(e);
        connectivity.push(layout.element_nodes(i, j, k).map(|n| n as u32));
        template_of.push(grid.element_material(e) as u16);
    }
    let n_nodes = layout.node_count();
    let mut count = vec![0u32; n_nodes + 1];
    for nodes in &connectivity {
        for &n in nodes {
            count[n as usize + 1] += 1;
        }
    }
    for n in 0..n_nodes {
        count[n + 1] += count[n];
    }
    let adjacency_start = count.clone();
    let mut cursor = count;
    let mut adjacency = vec![0u32; CORNERS * n_el];
    for (e, nodes) in connectivity.iter().enumerate() {
        for (c, &n) in nodes.iter().enumerate() {
            let slot = &mut cursor[n as usize];
            adjacency[*slot as usize] = (e * CORNERS + c) as u32;
            *slot += 1;
        }
    }
    StiffnessOperator {
        templates,
        template_of,
        connectivity,
        adjacency_start,
        adjacency,
    }
}

/// Lumped mass: each element contributes `rho dx^3 / 8` to each of its nodes.
pub fn assemble_lumped_mass(
    grid: &StructuredGrid,
    layout: &DofLayout,
    stiffness: &StiffnessOperator,
    materials: &[ElasticMaterial],
) -> LumpedMass {
    let share = grid.dx().powi(3) / CORNERS as f64;
    let mut mass = vec![0.0; layout.node_count()];
    for e in 0..stiffness.element_count() {
        let m = materials[grid.element_material(e)].density() * share;
        for n in stiffness.element_nodes(e) {
            mass[n] += m;
        }
    }
    let inverse = mass.iter().map(|&m| if m > 0.0 { 1.0 / m } else { 0.0 }).collect();
    LumpedMass { mass, inverse }
}
