//! Regular hexahedral mesh of the virtual strip and material regions.
//!
//! Axes: `x1` along strike, `x2` normal to the fault and virtual boundaries,
//! `x3` along dip. Elements are cubes of edge `dx`. The strip is treated as
//! periodic in `x1` and `x3` by the solver, so `N1` and `N3` must be sizes the
//! spectral transform handles efficiently.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::ElasticMaterial;

/// Axis-aligned box assigning a material index to the elements whose
/// centroids fall inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub material: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid {
    n: [usize; 3],
    dx: f64,
    origin: [f64; 3],
    element_material: Vec<usize>,
}

/// True when `n` factors entirely into 2, 3 and 5.
pub fn is_spectral_size(n: usize) -> bool {
    if n == 0 {
        return false;
    }
    let mut m = n;
    for p in [2, 3, 5] {
        while m % p == 0 {
            m /= p;
        }
    }
    m == 1
}

fn element_count(length: f64, dx: f64, axis: usize) -> Result<usize> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::Grid(format!("extent along x{} must be positive", axis + 1)));
    }
    let ratio = length / dx;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::Grid(format!(
            "extent {length} m along x{} is not a multiple of dx = {dx} m",
            axis + 1
        )));
    }
    Ok(n as usize)
}

/// Builds a grid centred on the origin with cubic elements of edge `dx`.
pub fn build_grid(extents: [f64; 3], dx: f64) -> Result<StructuredGrid> {
    let origin = [-0.5 * extents[0], -0.5 * extents[1], -0.5 * extents[2]];
    build_grid_at(extents, dx, origin)
}

/// Builds a grid whose minimum corner sits at `origin`.
pub fn build_grid_at(extents: [f64; 3], dx: f64, origin: [f64; 3]) -> Result<StructuredGrid> {
    if !(dx.is_finite() && dx > 0.0) {
        return Err(Error::Grid(format!("dx must be positive, got {dx}")));
    }
    let n1 = element_count(extents[0], dx, 0)?;
    let n2 = element_count(extents[1], dx, 1)?;
    let n3 = element_count(extents[2], dx, 2)?;
    StructuredGrid::new([n1, n2, n3], dx, origin)
}

impl StructuredGrid {
    pub fn new(n: [usize; 3], dx: f64, origin: [f64; 3]) -> Result<Self> {
        for axis in [0, 2] {
            if !is_spectral_size(n[axis]) {
                return Err(Error::Grid(format!(
                    "N{} = {} is not a product of 2, 3 and 5",
                    axis + 1,
                    n[axis]
                )));
            }
        }
        if n[1] < 1 {
            return Err(Error::Grid("strip needs at least one element layer".into()));
        }
        Ok(Self {
            n,
            dx,
            origin,
            element_material: vec![0; n[0] * n[1] * n[2]],
        })
    }

    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn extents(&self) -> [f64; 3] {
        [
            self.n[0] as f64 * self.dx,
            self.n[1] as f64 * self.dx,
            self.n[2] as f64 * self.dx,
        ]
    }

    pub fn upper(&self) -> [f64; 3] {
        let e = self.extents();
        [self.origin[0] + e[0], self.origin[1] + e[1], self.origin[2] + e[2]]
    }

    /// Geometric node count `(N1+1)(N2+1)(N3+1)`; the periodic solver later
    /// identifies the images on the lateral faces.
    pub fn node_count(&self) -> usize {
        (self.n[0] + 1) * (self.n[1] + 1) * (self.n[2] + 1)
    }

    pub fn element_count(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i <= self.n[0] && j <= self.n[1] && k <= self.n[2]);
        (j * (self.n[2] + 1) + k) * (self.n[0] + 1) + i
    }

    pub fn node_ijk(&self, index: usize) -> [usize; 3] {
        let nx = self.n[0] + 1;
        let nz = self.n[2] + 1;
        [index % nx, index / (nx * nz), (index / nx) % nz]
    }

    pub fn node_coords(&self, index: usize) -> [f64; 3] {
        let [i, j, k] = self.node_ijk(index);
        self.coords_of(i, j, k)
    }

    pub fn coords_of(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + i as f64 * self.dx,
            self.origin[1] + j as f64 * self.dx,
            self.origin[2] + k as f64 * self.dx,
        ]
    }

    /// Index of the node at `x`, if `x` is a grid point.
    pub fn locate_node(&self, x: [f64; 3]) -> Option<usize> {
        let mut ijk = [0usize; 3];
        for a in 0..3 {
            let r = (x[a] - self.origin[a]) / self.dx;
            let n = r.round();
            if (r - n).abs() > 1e-6 || n < 0.0 || n as usize > self.n[a] {
                return None;
            }
            ijk[a] = n as usize;
        }
        Some(self.node_index(ijk[0], ijk[1], ijk[2]))
    }

    pub fn element_index(&self, i: usize, j: usize, k: usize) -> usize {
        (j * self.n[2] + k) * self.n[0] + i
    }

    pub fn element_ijk(&self, e: usize) -> [usize; 3] {
        [e % self.n[0], e / (self.n[0] * self.n[2]), (e / self.n[0]) % self.n[2]]
    }

    pub fn element_center(&self, e: usize) -> [f64; 3] {
        let [i, j, k] = self.element_ijk(e);
        [
            self.origin[0] + (i as f64 + 0.5) * self.dx,
            self.origin[1] + (j as f64 + 0.5) * self.dx,
            self.origin[2] + (k as f64 + 0.5) * self.dx,
        ]
    }

    pub fn element_material(&self, e: usize) -> usize {
        self.element_material[e]
    }

    pub fn element_materials(&self) -> &[usize] {
        &self.element_material
    }

    /// Material of the element layer `j` (all elements of a layer must agree
    /// for that layer to face a homogeneous half-space).
    pub fn layer_material(&self, j: usize) -> Option<usize> {
        let first = self.element_material[self.element_index(0, j, 0)];
        let n_layer = self.n[0] * self.n[2];
        let start = j * n_layer;
        self.element_material[start..start + n_layer]
            .iter()
            .all(|&m| m == first)
            .then_some(first)
    }

    /// Nodes on the plane `x2 = max` (the `S+` virtual boundary).
    pub fn top_nodes(&self) -> Vec<usize> {
        self.plane_nodes(self.n[1])
    }

    /// Nodes on the plane `x2 = min` (the `S-` virtual boundary).
    pub fn bottom_nodes(&self) -> Vec<usize> {
        self.plane_nodes(0)
    }

    pub fn plane_nodes(&self, j: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity((self.n[0] + 1) * (self.n[2] + 1));
        for k in 0..=self.n[2] {
            for i in 0..=self.n[0] {
                out.push(self.node_index(i, j, k));
            }
        }
        out
    }

    /// Node layer index of the plane `x2`, if it is a grid plane.
    pub fn layer_of(&self, x2: f64) -> Option<usize> {
        let r = (x2 - self.origin[1]) / self.dx;
        let n = r.round();
        ((r - n).abs() < 1e-6 && n >= 0.0 && n as usize <= self.n[1]).then_some(n as usize)
    }

    /// Upper half `x2 >= 0` of a strip centred on the fault plane, as used by
    /// the mirror-symmetric formulation.
    pub fn upper_half(&self) -> Result<StructuredGrid> {
        let j0 = self
            .layer_of(0.0)
            .ok_or_else(|| Error::Grid("x2 = 0 is not a node plane".into()))?;
        if j0 == self.n[1] {
            return Err(Error::Grid("no elements above x2 = 0".into()));
        }
        let mut half = StructuredGrid::new(
            [self.n[0], self.n[1] - j0, self.n[2]],
            self.dx,
            [self.origin[0], 0.0, self.origin[2]],
        )?;
        for e in 0..half.element_count() {
            let [i, j, k] = half.element_ijk(e);
            half.element_material[e] = self.element_material[self.element_index(i, j + j0, k)];
        }
        Ok(half)
    }

    fn contains_box(&self, region: &RegionSpec) -> std::result::Result<(), String> {
        let lo = self.origin;
        let hi = self.upper();
        let tol = 1e-6 * self.dx;
        for a in 0..3 {
            if region.min[a] > region.max[a] {
                return Err(format!("min > max along x{}", a + 1));
            }
            if region.min[a] < lo[a] - tol || region.max[a] > hi[a] + tol {
                return Err(format!(
                    "[{}, {}] exceeds [{}, {}] along x{}",
                    region.min[a],
                    region.max[a],
                    lo[a],
                    hi[a],
                    a + 1
                ));
            }
        }
        Ok(())
    }
}

/// Assigns region materials. Elements outside every box keep material 0;
/// where boxes overlap, the later entry wins.
pub fn assign_regions(
    mut grid: StructuredGrid,
    regions: &[RegionSpec],
    materials: &[ElasticMaterial],
) -> Result<StructuredGrid> {
    if materials.is_empty() {
        return Err(Error::Grid("at least one material is required".into()));
    }
    for (index, region) in regions.iter().enumerate() {
        if region.material >= materials.len() {
            return Err(Error::Grid(format!(
                "region {index} references material {} but only {} are defined",
                region.material,
                materials.len()
            )));
        }
        grid.contains_box(region)
            .map_err(|reason| Error::RegionOutside { index, reason })?;
    }
    for e in 0..grid.element_count() {
        let c = grid.element_center(e);
        let mut mat = 0;
        for region in regions {
            if (0..3).all(|a| c[a] >= region.min[a] && c[a] <= region.max[a]) {
                mat = region.material;
            }
        }
        grid.element_material[e] = mat;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn host() -> ElasticMaterial {
        ElasticMaterial::from_wave_speeds(2670.0, 6000.0, 3464.0).unwrap()
    }

    #[test]
    fn tpv3_strip_counts() {
        let g = build_grid([30e3, 0.2e3, 15e3], 50.0).unwrap();
        assert_eq!(g.n(), [600, 4, 300]);
    }

    #[test]
    fn single_element() {
        let g = build_grid([1.0, 1.0, 1.0], 1.0).unwrap();
        assert_eq!(g.n(), [1, 1, 1]);
        assert_eq!(g.node_count(), 8);
        assert_eq!(g.element_count(), 1);
    }

    #[test]
    fn lvfz_strip_counts() {
        let g = build_grid([60e3, 2e3, 30e3], 100.0).unwrap();
        assert_eq!(g.n(), [600, 20, 300]);
        assert_eq!(g.top_nodes().len(), 601 * 301);
        assert!(g.top_nodes().iter().all(|&n| (g.node_coords(n)[1] - 1000.0).abs() < 1e-9));
        assert!(g.bottom_nodes().iter().all(|&n| (g.node_coords(n)[1] + 1000.0).abs() < 1e-9));
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(build_grid([30e3, 0.2e3, 15e3], 70.0), Err(Error::Grid(_))));
        // 7 elements along x1 is not a 2-3-5 size
        assert!(matches!(build_grid([7.0, 2.0, 4.0], 1.0), Err(Error::Grid(_))));
        assert!(build_grid([8.0, 2.0, 9.0], 1.0).is_ok());
    }

    #[test]
    fn spectral_sizes() {
        assert!(is_spectral_size(600));
        assert!(is_spectral_size(300));
        assert!(is_spectral_size(1));
        assert!(!is_spectral_size(14));
        assert!(!is_spectral_size(0));
    }

    #[test]
    fn lvfz_region_assignment() {
        let g = build_grid([6e3, 2e3, 3e3], 100.0).unwrap();
        let slow = host().with_speed_factor(0.8).unwrap();
        let lo = g.origin();
        let hi = g.upper();
        let lvfz = RegionSpec {
            min: [lo[0], -800.0, lo[2]],
            max: [hi[0], 800.0, hi[2]],
            material: 1,
        };
        let g = assign_regions(g, &[lvfz], &[host(), slow]).unwrap();
        for e in 0..g.element_count() {
            let [_, j, _] = g.element_ijk(e);
            // layers 2..18 of 20 lie within 8 layers of the fault
            let expected = usize::from((2..18).contains(&j));
            assert_eq!(g.element_material(e), expected, "layer {j}");
        }
        let upper = g.upper_half().unwrap();
        assert_eq!(upper.n()[1], 10);
        assert_eq!((0..10).filter(|&j| upper.layer_material(j) == Some(1)).count(), 8);
    }

    #[test]
    fn off_fault_zone_is_complement() {
        let g = build_grid([6e3, 2e3, 3e3], 100.0).unwrap();
        let slow = host().with_speed_factor(0.8).unwrap();
        let (lo, hi) = (g.origin(), g.upper());
        let inner = [RegionSpec {
            min: [lo[0], -800.0, lo[2]],
            max: [hi[0], 800.0, hi[2]],
            material: 1,
        }];
        let outer = [
            RegionSpec {
                min: [lo[0], 800.0, lo[2]],
                max: hi,
                material: 1,
            },
            RegionSpec {
                min: lo,
                max: [hi[0], -800.0, hi[2]],
                material: 1,
            },
        ];
        let a = assign_regions(g.clone(), &inner, &[host(), slow]).unwrap();
        let b = assign_regions(g, &outer, &[host(), slow]).unwrap();
        for e in 0..a.element_count() {
            assert_eq!(a.element_material(e) + b.element_material(e), 1);
        }
    }

    #[test]
    fn empty_regions_default_material() {
        let g = build_grid([4.0, 2.0, 4.0], 1.0).unwrap();
        let g = assign_regions(g, &[], &[host()]).unwrap();
        assert!(g.element_materials().iter().all(|&m| m == 0));
    }

    #[test]
    fn region_outside_strip_rejected() {
        let g = build_grid([4.0, 2.0, 4.0], 1.0).unwrap();
        let r = RegionSpec {
            min: [-1.0, -5.0, -1.0],
            max: [1.0, 1.0, 1.0],
            material: 0,
        };
        assert!(matches!(
            assign_regions(g.clone(), &[r], &[host()]),
            Err(Error::RegionOutside { index: 0, .. })
        ));
        let bad_index = RegionSpec {
            min: [-1.0, -1.0, -1.0],
            max: [1.0, 1.0, 1.0],
            material: 3,
        };
        assert!(assign_regions(g, &[bad_index], &[host()]).is_err());
    }

    proptest! {
        #[test]
        fn node_indexing_round_trips(n1 in 1usize..6, n2 in 1usize..5, n3 in 1usize..6) {
            let g = StructuredGrid::new([n1.min(5), n2, n3.min(5)], 2.0, [-1.0, 0.5, 3.0]);
            prop_assume!(g.is_ok());
            let g = g.unwrap();
            for idx in 0..g.node_count() {
                let x = g.node_coords(idx);
                prop_assert_eq!(g.locate_node(x), Some(idx));
                let [i, j, k] = g.node_ijk(idx);
                prop_assert_eq!(g.node_index(i, j, k), idx);
            }
        }

        #[test]
        fn disjoint_boxes_commute(split in 1usize..7) {
            let g = build_grid([8.0, 4.0, 8.0], 1.0).unwrap();
            let s = split as f64 - 4.0;
            let a = RegionSpec { min: [-4.0, -2.0, -4.0], max: [s - 0.25, 2.0, 4.0], material: 1 };
            let b = RegionSpec { min: [s + 0.25, -2.0, -4.0], max: [4.0, 2.0, 4.0], material: 2 };
            let mats = [host(), host().with_speed_factor(0.9).unwrap(), host().with_speed_factor(0.8).unwrap()];
            let ab = assign_regions(g.clone(), &[a.clone(), b.clone()], &mats).unwrap();
            let ba = assign_regions(g, &[b, a], &mats).unwrap();
            prop_assert_eq!(ab.element_materials(), ba.element_materials());
        }
    }
}
