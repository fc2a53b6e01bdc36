use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::primitives::tet_signed_volume;
use super::surface::TriangleSurface;
use super::Point3;
use crate::error::{Error, Result};

/// Tetrahedral volume mesh whose boundary is a [`TriangleSurface`].
///
/// `surface_vertices[i]` is the tet-mesh vertex that carries surface vertex
/// `i`; boundary faces of the tetrahedra coincide with surface triangles under
/// this map.
#[derive(Debug, Clone, PartialEq)]
pub struct TetrahedralMesh {
    vertices: Vec<Point3>,
    tetrahedra: Vec<[usize; 4]>,
    surface_vertices: Vec<usize>,
}

impl TetrahedralMesh {
    /// Builds a mesh and checks index bounds and positive orientation.
    pub fn new(vertices: Vec<Point3>, tetrahedra: Vec<[usize; 4]>, surface_vertices: Vec<usize>) -> Result<Self> {
        for (t, tet) in tetrahedra.iter().enumerate() {
            if tet.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::invariant("tetrahedron indices", format!("tetrahedron {t} is out of range")));
            }
        }
        if let Some(&i) = surface_vertices.iter().find(|&&i| i >= vertices.len()) {
            return Err(Error::invariant("boundary map", format!("surface vertex maps to missing vertex {i}")));
        }
        let mesh = Self { vertices, tetrahedra, surface_vertices };
        if let Some(t) = mesh.first_non_positive(&mesh.vertices) {
            return Err(Error::invariant(
                "positive tetrahedron volume",
                format!("tetrahedron {t} has volume {:e}", mesh.volume_of(t, &mesh.vertices)),
            ));
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn tetrahedra(&self) -> &[[usize; 4]] {
        &self.tetrahedra
    }

    pub fn surface_vertices(&self) -> &[usize] {
        &self.surface_vertices
    }

    /// Same connectivity, new positions. Orientation is not re-checked.
    pub fn with_vertices_unchecked(&self, vertices: Vec<Point3>) -> Self {
        Self { vertices, tetrahedra: self.tetrahedra.clone(), surface_vertices: self.surface_vertices.clone() }
    }

    pub(crate) fn volume_of(&self, t: usize, positions: &[Point3]) -> f64 {
        let [a, b, c, d] = self.tetrahedra[t];
        tet_signed_volume(&positions[a], &positions[b], &positions[c], &positions[d])
    }

    /// Index of the first tetrahedron whose volume under `positions` is not
    /// strictly positive.
    pub fn first_non_positive(&self, positions: &[Point3]) -> Option<usize> {
        (0..self.tetrahedra.len()).find(|&t| !(self.volume_of(t, positions) > 0.0))
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.tetrahedra.len()).map(|t| self.volume_of(t, &self.vertices)).sum()
    }

    /// Sorted vertex neighbours through tetrahedron edges.
    pub fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.vertices.len()];
        for tet in &self.tetrahedra {
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        adj[tet[i]].insert(tet[j]);
                    }
                }
            }
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Faces used by exactly one tetrahedron, as sorted vertex triples.
    pub fn boundary_faces(&self) -> BTreeSet<[usize; 3]> {
        let mut count: BTreeMap<[usize; 3], usize> = BTreeMap::new();
        for tet in &self.tetrahedra {
            for skip in 0..4 {
                let mut f = [0usize; 3];
                let mut k = 0;
                for (i, &v) in tet.iter().enumerate() {
                    if i != skip {
                        f[k] = v;
                        k += 1;
                    }
                }
                f.sort_unstable();
                *count.entry(f).or_insert(0) += 1;
            }
        }
        count.into_iter().filter(|&(_, n)| n == 1).map(|(f, _)| f).collect()
    }

    /// Checks that the boundary of the mesh is exactly `surface` under the
    /// boundary map and that mapped vertices coincide.
    pub fn check_boundary(&self, surface: &TriangleSurface) -> Result<()> {
        if self.surface_vertices.len() != surface.len() {
            return Err(Error::invariant(
                "tet boundary equals surface",
                format!(
                    "boundary map has {} entries for {} surface vertices",
                    self.surface_vertices.len(),
                    surface.len()
                ),
            ));
        }
        for (i, &t) in self.surface_vertices.iter().enumerate() {
            let d = (self.vertices[t] - surface.vertices()[i]).norm();
            if d > 1e-9 {
                return Err(Error::invariant(
                    "tet boundary equals surface",
                    format!("surface vertex {i} is {d:e} mm from tet vertex {t}"),
                ));
            }
        }
        let faces: BTreeSet<[usize; 3]> = surface
            .triangles()
            .iter()
            .map(|tri| {
                let mut f = tri.map(|i| self.surface_vertices[i]);
                f.sort_unstable();
                f
            })
            .collect();
        if faces != self.boundary_faces() {
            return Err(Error::invariant(
                "tet boundary equals surface",
                "boundary faces of the tetrahedra differ from the surface triangles",
            ));
        }
        Ok(())
    }
}
