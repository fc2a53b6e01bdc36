use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::primitives::{triangle_area, triangle_area_vector};
use super::{Point3, Vec3};
use crate::error::{Error, Result};

/// Indexed triangle surface with cached per-vertex unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleSurface {
    vertices: Vec<Point3>,
    triangles: Vec<[usize; 3]>,
    normals: Vec<Vec3>,
}

impl TriangleSurface {
    /// Builds a surface, checking indices and computing vertex normals.
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if let Some((i, _)) = vertices.iter().enumerate().find(|(_, v)| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::invariant("finite coordinates", format!("vertex {i} is not finite")));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::invariant(
                    "triangle indices",
                    format!("triangle {t} references a vertex beyond {}", vertices.len()),
                ));
            }
        }
        let normals = compute_vertex_normals(&vertices, &triangles)?;
        Ok(Self { vertices, triangles, normals })
    }

    /// Builds a surface that must additionally be closed and edge-manifold.
    pub fn new_closed(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let s = Self::new(vertices, triangles)?;
        s.check_closed_manifold()?;
        Ok(s)
    }

    /// Same topology, new vertex positions; normals are recomputed.
    pub fn with_vertices(&self, vertices: Vec<Point3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        let normals = compute_vertex_normals(&vertices, &self.triangles)?;
        Ok(Self { vertices, triangles: self.triangles.clone(), normals })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Every undirected edge must be used by exactly two triangles, once in
    /// each direction.
    pub fn check_closed_manifold(&self) -> Result<()> {
        let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if a == b {
                    return Err(Error::invariant("closed manifold", format!("collapsed edge at vertex {a}")));
                }
                *directed.entry((a, b)).or_insert(0) += 1;
            }
        }
        for (&(a, b), &n) in &directed {
            if n != 1 {
                return Err(Error::invariant("closed manifold", format!("directed edge ({a}, {b}) used {n} times")));
            }
            if !directed.contains_key(&(b, a)) {
                return Err(Error::invariant("closed manifold", format!("edge ({a}, {b}) is a boundary edge")));
            }
        }
        Ok(())
    }

    /// Sorted one-ring neighbours of every vertex.
    pub fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for ring in &mut adj {
            ring.sort_unstable();
            ring.dedup();
        }
        adj
    }

    pub fn triangle_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangles[t];
        triangle_area_vector(&self.vertices[a], &self.vertices[b], &self.vertices[c])
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| triangle_area(&self.vertices[a], &self.vertices[b], &self.vertices[c]))
            .sum()
    }

    /// Enclosed volume via the divergence theorem; positive for outward
    /// orientation.
    pub fn enclosed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| self.vertices[a].dot(&self.vertices[b].cross(&self.vertices[c])) / 6.0)
            .sum()
    }

    pub fn centroid(&self) -> Point3 {
        let n = self.vertices.len().max(1) as f64;
        self.vertices.iter().fold(Point3::zeros(), |acc, v| acc + v) / n
    }
}

/// Area-weighted vertex normals, normalized to unit length. The winding of
/// each triangle decides the orientation.
pub fn compute_vertex_normals(vertices: &[Point3], triangles: &[[usize; 3]]) -> Result<Vec<Vec3>> {
    let mut acc = vec![Vec3::zeros(); vertices.len()];
    let mut scale = vec![0.0f64; vertices.len()];
    for &[a, b, c] in triangles {
        let n = triangle_area_vector(&vertices[a], &vertices[b], &vertices[c]);
        let edge = (vertices[b] - vertices[a]).norm_squared().max((vertices[c] - vertices[a]).norm_squared());
        for i in [a, b, c] {
            acc[i] += n;
            scale[i] = scale[i].max(edge);
        }
    }
    acc.into_iter()
        .zip(scale)
        .enumerate()
        .map(|(i, (n, s))| {
            let len = n.norm();
            if !(len > 1e-14 * s) || len == 0.0 {
                Err(Error::DegenerateGeometry(format!("vertex {i} has a zero-area umbrella")))
            } else {
                Ok(n / len)
            }
        })
        .collect()
}
