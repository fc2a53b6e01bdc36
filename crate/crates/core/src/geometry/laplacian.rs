//! Discrete Laplacian `L(u_i) = Σ_{j∈A_i} ω_ij (u_i − u_j)` and its edge
//! weightings.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::primitives::triangle_area;
use super::surface::TriangleSurface;
use super::Vec3;
use crate::error::{Error, Result};

/// Directed edge weights `ω_ij`, keyed by `(i, j)`.
pub type EdgeWeights = BTreeMap<(usize, usize), f64>;

/// Weighting scheme for a Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LaplacianKind {
    /// `ω_ij = 1 / |A_i|`.
    Uniform,
    /// Cotangent weights over the mixed Voronoi area.
    Cotangent,
}

/// A Laplacian in row form: for every vertex, its neighbours and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianOperator {
    rows: Vec<Vec<(usize, f64)>>,
}

impl LaplacianOperator {
    /// Pairs every adjacency entry with its weight.
    pub fn new(adjacency: &[Vec<usize>], weights: &EdgeWeights) -> Result<Self> {
        let rows = adjacency
            .iter()
            .enumerate()
            .map(|(i, ring)| {
                ring.iter()
                    .map(|&j| {
                        weights
                            .get(&(i, j))
                            .map(|&w| (j, w))
                            .ok_or_else(|| Error::Config(format!("missing Laplacian weight for edge ({i}, {j})")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    pub fn uniform(adjacency: &[Vec<usize>]) -> Self {
        let rows = adjacency
            .iter()
            .map(|ring| {
                let w = if ring.is_empty() { 0.0 } else { 1.0 / ring.len() as f64 };
                ring.iter().map(|&j| (j, w)).collect()
            })
            .collect();
        Self { rows }
    }

    pub fn for_surface(surface: &TriangleSurface, kind: LaplacianKind) -> Result<Self> {
        let adjacency = surface.vertex_adjacency();
        match kind {
            LaplacianKind::Uniform => Ok(Self::uniform(&adjacency)),
            LaplacianKind::Cotangent => Self::new(&adjacency, &cotangent_weights(surface)?),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn apply(&self, field: &[Vec3]) -> Vec<Vec3> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().fold(Vec3::zeros(), |acc, &(j, w)| acc + (field[i] - field[j]) * w))
            .collect()
    }

    /// The operator as sparse matrix rows over the field entries: row `i` has
    /// `Σ_j ω_ij` on the diagonal and `−ω_ij` off it.
    pub fn matrix_rows(&self) -> Vec<Vec<(usize, f64)>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut out = Vec::with_capacity(row.len() + 1);
                out.push((i, row.iter().map(|&(_, w)| w).sum()));
                out.extend(row.iter().map(|&(j, w)| (j, -w)));
                out
            })
            .collect()
    }
}

/// Applies the Laplacian with explicit adjacency and weights.
pub fn discrete_laplacian(field: &[Vec3], adjacency: &[Vec<usize>], weights: &EdgeWeights) -> Result<Vec<Vec3>> {
    if field.len() != adjacency.len() {
        return Err(Error::InvalidArgument(format!(
            "field has {} entries but adjacency has {}",
            field.len(),
            adjacency.len()
        )));
    }
    Ok(LaplacianOperator::new(adjacency, weights)?.apply(field))
}

/// Cotangent weights `ω_ij = (cot α_ij + cot β_ij) / (2 A_i)` with `A_i` the
/// mixed Voronoi area of vertex `i`. Weights keep their sign so that linear
/// fields stay in the kernel on planar rings.
pub fn cotangent_weights(surface: &TriangleSurface) -> Result<EdgeWeights> {
    let v = surface.vertices();
    let mut cot_sum: EdgeWeights = BTreeMap::new();
    let mut area = vec![0.0f64; v.len()];
    for (t, &[a, b, c]) in surface.triangles().iter().enumerate() {
        let ar = triangle_area(&v[a], &v[b], &v[c]);
        if ar < 1e-12 {
            return Err(Error::DegenerateGeometry(format!("triangle {t} has area {ar:e} mm²")));
        }
        let idx = [a, b, c];
        let mut cots = [0.0; 3];
        for k in 0..3 {
            let (o, p, q) = (idx[k], idx[(k + 1) % 3], idx[(k + 2) % 3]);
            let e1 = v[p] - v[o];
            let e2 = v[q] - v[o];
            cots[k] = e1.dot(&e2) / e1.cross(&e2).norm();
            // the angle at `o` is opposite edge (p, q)
            *cot_sum.entry((p, q)).or_insert(0.0) += cots[k];
            *cot_sum.entry((q, p)).or_insert(0.0) += cots[k];
        }
        // mixed Voronoi area (Meyer et al. 2003)
        let obtuse = (0..3).find(|&k| cots[k] < 0.0);
        for k in 0..3 {
            let (o, p, q) = (idx[k], idx[(k + 1) % 3], idx[(k + 2) % 3]);
            area[o] += match obtuse {
                None => {
                    (cots[(k + 2) % 3] * (v[p] - v[o]).norm_squared()
                        + cots[(k + 1) % 3] * (v[q] - v[o]).norm_squared())
                        / 8.0
                }
                Some(ob) if ob == k => ar / 2.0,
                Some(_) => ar / 4.0,
            };
        }
    }
    Ok(cot_sum.into_iter().map(|((i, j), c)| ((i, j), c / (2.0 * area[i]))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use alloc::vec;

    fn hexagon_fan(radius: f64) -> TriangleSurface {
        let mut v = vec![Point3::zeros()];
        for k in 0..6 {
            let a = k as f64 * core::f64::consts::PI / 3.0;
            v.push(Point3::new(radius * libm::cos(a), radius * libm::sin(a), 0.0));
        }
        let t = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();
        TriangleSurface::new(v, t).unwrap()
    }

    #[test]
    fn constant_field_has_zero_laplacian() {
        let s = hexagon_fan(1.0);
        let op = LaplacianOperator::for_surface(&s, LaplacianKind::Cotangent).unwrap();
        let c = Vec3::new(0.3, -2.0, 5.0);
        for l in op.apply(&vec![c; s.len()]) {
            assert!(l.norm() < 1e-15);
        }
    }

    #[test]
    fn two_neighbour_example() {
        let adj = vec![vec![1, 2], vec![], vec![]];
        let w: EdgeWeights = [((0, 1), 0.5), ((0, 2), 0.5)].into_iter().collect();
        let field = [Vec3::new(1.0, 0.0, 0.0), Vec3::zeros(), Vec3::zeros()];
        let l = discrete_laplacian(&field, &adj, &w).unwrap();
        assert_eq!(l[0], Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn missing_weight_is_config_error() {
        let adj = vec![vec![1], vec![0]];
        let w: EdgeWeights = [((0, 1), 1.0)].into_iter().collect();
        let err = discrete_laplacian(&[Vec3::zeros(); 2], &adj, &w).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn equilateral_ring_weights_match_hand_value() {
        // cot 60° = 1/√3 on both sides, Voronoi area of the hub = √3/2,
        // so ω = (2/√3) / (2 · √3/2) = 2/3.
        let s = hexagon_fan(1.0);
        let w = cotangent_weights(&s).unwrap();
        for j in 1..=6 {
            assert!((w[&(0, j)] - 2.0 / 3.0).abs() < 1e-12, "{}", w[&(0, j)]);
        }
    }

    #[test]
    fn right_angle_contributes_nothing() {
        // two right isosceles triangles sharing the hypotenuse (0,0)-(1,1)
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let s = TriangleSurface::new(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap();
        let w = cotangent_weights(&s).unwrap();
        // the hypotenuse is opposite the two right angles at 1 and 3
        assert!(w[&(0, 2)].abs() < 1e-12);
        assert!(w[&(0, 1)] > 0.0);
    }

    #[test]
    fn linear_field_vanishes_at_planar_interior_vertex() {
        // irregular planar one-ring
        let mut v = vec![Point3::new(0.1, -0.05, 0.0)];
        let radii = [1.0, 1.3, 0.8, 1.1, 0.9, 1.25, 1.05];
        for (k, r) in radii.iter().enumerate() {
            let a = k as f64 * 2.0 * core::f64::consts::PI / 7.0 + 0.1 * k as f64;
            v.push(Point3::new(r * libm::cos(a), r * libm::sin(a), 0.0));
        }
        let t = (0..7).map(|k| [0, 1 + k, 1 + (k + 1) % 7]).collect();
        let s = TriangleSurface::new(v, t).unwrap();
        let op = LaplacianOperator::for_surface(&s, LaplacianKind::Cotangent).unwrap();
        let lin: Vec<Vec3> = s.vertices().iter().map(|p| Vec3::new(p.x, p.y, 2.0 * p.x - 3.0 * p.y)).collect();
        assert!(op.apply(&lin)[0].norm() < 1e-9);
        let coords: Vec<Vec3> = s.vertices().to_vec();
        assert!(op.apply(&coords)[0].norm() < 1e-9);
    }
}
