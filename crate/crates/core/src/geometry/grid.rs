use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::barycentric::TetSpace;
use super::primitives::tet_signed_volume;
use super::{LobeModel, Point3, Vec3};
use crate::error::{Error, Result};

/// Axis-aligned cuboid control lattice, each cell split into six
/// tetrahedra sharing the cell's main diagonal. The split is identical in
/// every cell, so neighbouring cells carry the same face diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationGrid {
    cells: [usize; 3],
    origin: Point3,
    spacing: Vec3,
    rest: Vec<Point3>,
    displacement: Vec<Vec3>,
    tetrahedra: Vec<[usize; 4]>,
}

/// The six axis orders of the Kuhn subdivision.
const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

impl DeformationGrid {
    /// Lattice bounding `points` expanded by `margin` millimetres.
    pub fn build(points: &[Point3], cells: [usize; 3], margin: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("cannot build a grid around an empty model".into()));
        }
        if cells.contains(&0) {
            return Err(Error::InvalidArgument("grid needs at least one cell per axis".into()));
        }
        if !(margin >= 0.0) {
            return Err(Error::InvalidArgument("grid margin must be non-negative".into()));
        }
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        lo -= Vec3::repeat(margin);
        hi += Vec3::repeat(margin);
        let extent = hi - lo;
        if extent.iter().any(|&e| !(e > 1e-12)) {
            return Err(Error::DegenerateGeometry("bounding box has zero extent".into()));
        }
        let spacing = Vec3::new(extent.x / cells[0] as f64, extent.y / cells[1] as f64, extent.z / cells[2] as f64);
        let [nx, ny, nz] = cells;
        let mut rest = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    // the far faces land exactly on `hi`
                    let c = |n: usize, of: usize, l: f64, h: f64| {
                        if n == of {
                            h
                        } else {
                            l + (h - l) * n as f64 / of as f64
                        }
                    };
                    rest.push(Point3::new(c(i, nx, lo.x, hi.x), c(j, ny, lo.y, hi.y), c(k, nz, lo.z, hi.z)));
                }
            }
        }
        let mut grid = Self {
            cells,
            origin: lo,
            spacing,
            displacement: vec![Vec3::zeros(); rest.len()],
            rest,
            tetrahedra: Vec::with_capacity(6 * nx * ny * nz),
        };
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    for perm in PERMUTATIONS {
                        let mut at = [i, j, k];
                        let mut tet = [grid.vertex_index(i, j, k); 4];
                        for (s, &axis) in perm.iter().enumerate() {
                            at[axis] += 1;
                            tet[s + 1] = grid.vertex_index(at[0], at[1], at[2]);
                        }
                        let r = &grid.rest;
                        if tet_signed_volume(&r[tet[0]], &r[tet[1]], &r[tet[2]], &r[tet[3]]) < 0.0 {
                            tet.swap(2, 3);
                        }
                        grid.tetrahedra.push(tet);
                    }
                }
            }
        }
        Ok(grid)
    }

    /// Grid around all surface, tet and centerline vertices of `model`.
    pub fn around_model(model: &LobeModel, cells: [usize; 3], margin: f64) -> Result<Self> {
        Self::build(&model.all_points(), cells, margin)
    }

    pub fn cells(&self) -> [usize; 3] {
        self.cells
    }

    pub fn vertex_index(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.cells;
        i + (nx + 1) * (j + (ny + 1) * k)
    }

    pub fn rest_vertices(&self) -> &[Point3] {
        &self.rest
    }

    pub fn tetrahedra(&self) -> &[[usize; 4]] {
        &self.tetrahedra
    }

    pub fn displacement(&self) -> &[Vec3] {
        &self.displacement
    }

    pub fn set_displacement(&mut self, displacement: Vec<Vec3>) -> Result<()> {
        if displacement.len() != self.rest.len() {
            return Err(Error::InvalidArgument("displacement length differs from grid vertex count".into()));
        }
        self.displacement = displacement;
        Ok(())
    }

    pub fn deformed_vertices(&self) -> Vec<Point3> {
        self.rest.iter().zip(&self.displacement).map(|(r, u)| r + u).collect()
    }

    /// Sorted neighbours of every grid vertex through tetrahedron edges.
    pub fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.rest.len()];
        for tet in &self.tetrahedra {
            for a in tet {
                for b in tet {
                    if a != b {
                        adj[*a].insert(*b);
                    }
                }
            }
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Smallest signed tetrahedron volume under the given vertex positions.
    pub fn min_volume(&self, positions: &[Point3]) -> f64 {
        self.tetrahedra
            .iter()
            .map(|t| tet_signed_volume(&positions[t[0]], &positions[t[1]], &positions[t[2]], &positions[t[3]]))
            .fold(f64::INFINITY, f64::min)
    }
}

impl TetSpace for DeformationGrid {
    fn positions(&self) -> &[Point3] {
        &self.rest
    }

    fn elements(&self) -> &[[usize; 4]] {
        &self.tetrahedra
    }

    fn candidates(&self, p: &Point3) -> Vec<usize> {
        let rel = p - self.origin;
        let idx = |a: usize| {
            let f = libm::floor(rel[a] / self.spacing[a]);
            if f < 0.0 {
                0
            } else {
                (f as usize).min(self.cells[a] - 1)
            }
        };
        let [nx, ny, _] = self.cells;
        let cell = idx(0) + nx * (idx(1) + ny * idx(2));
        (6 * cell..6 * cell + 6).collect()
    }
}
