use alloc::vec::Vec;

use super::primitives::{point_tet_distance, tet_barycentric};
use super::{Point3, EMBED_EPS, SNAP_DISTANCE};
use crate::error::{Error, Result};

/// Attachment of a point to one tetrahedral element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarycentricBinding {
    pub element: usize,
    pub weights: [f64; 4],
}

/// Anything made of tetrahedral elements that points can be bound to.
pub trait TetSpace {
    fn positions(&self) -> &[Point3];
    fn elements(&self) -> &[[usize; 4]];

    /// Elements worth testing first for `p`; the default is all of them.
    fn candidates(&self, _p: &Point3) -> Vec<usize> {
        (0..self.elements().len()).collect()
    }
}

impl TetSpace for super::TetrahedralMesh {
    fn positions(&self) -> &[Point3] {
        self.vertices()
    }

    fn elements(&self) -> &[[usize; 4]] {
        self.tetrahedra()
    }
}

fn weights_in(space: &(impl TetSpace + ?Sized), t: usize, p: &Point3) -> Option<[f64; 4]> {
    let v = space.positions();
    let [a, b, c, d] = space.elements()[t];
    tet_barycentric(p, &v[a], &v[b], &v[c], &v[d])
}

fn bind_one(space: &(impl TetSpace + ?Sized), index: usize, p: &Point3) -> Result<BarycentricBinding> {
    let pick = |cands: &mut dyn Iterator<Item = usize>| {
        let mut best: Option<(usize, [f64; 4], f64)> = None;
        for t in cands {
            if let Some(w) = weights_in(space, t, p) {
                let m = w.iter().copied().fold(f64::INFINITY, f64::min);
                if best.is_none_or(|b| m > b.2) {
                    best = Some((t, w, m));
                }
            }
        }
        best
    };
    let mut found = pick(&mut space.candidates(p).into_iter());
    if found.is_none_or(|b| b.2 < -1e-12) {
        let all = pick(&mut (0..space.elements().len()));
        if all.is_some_and(|a| found.is_none_or(|f| a.2 > f.2)) {
            found = all;
        }
    }
    if let Some((element, weights, m)) = found {
        if m >= -1e-12 {
            return Ok(BarycentricBinding { element, weights });
        }
    }
    // outside every element: measure the gap to the nearest one
    let v = space.positions();
    let mut nearest = (f64::INFINITY, 0usize, *p);
    for (t, tet) in space.elements().iter().enumerate() {
        let (d, q) = point_tet_distance(p, [&v[tet[0]], &v[tet[1]], &v[tet[2]], &v[tet[3]]]);
        if d < nearest.0 {
            nearest = (d, t, q);
        }
    }
    let (dist, element, q) = nearest;
    if dist <= EMBED_EPS {
        let weights = weights_in(space, element, p).ok_or(Error::Binding { index, distance: dist })?;
        Ok(BarycentricBinding { element, weights })
    } else if dist <= SNAP_DISTANCE {
        let mut w = weights_in(space, element, &q).ok_or(Error::Binding { index, distance: dist })?;
        for x in &mut w {
            *x = x.max(0.0);
        }
        let s: f64 = w.iter().sum();
        Ok(BarycentricBinding { element, weights: w.map(|x| x / s) })
    } else {
        Err(Error::Binding { index, distance: dist })
    }
}

/// Binds every point to the element containing it. Points within
/// [`EMBED_EPS`] of the mesh keep their exact coordinates; points within
/// [`SNAP_DISTANCE`] are snapped onto the nearest element.
pub fn bind_barycentric(points: &[Point3], space: &(impl TetSpace + ?Sized)) -> Result<Vec<BarycentricBinding>> {
    points.iter().enumerate().map(|(i, p)| bind_one(space, i, p)).collect()
}

/// Interpolates bound points from (deformed) element vertex positions.
pub fn apply_deformation(bindings: &[BarycentricBinding], elements: &[[usize; 4]], vertices: &[Point3]) -> Vec<Point3> {
    bindings
        .iter()
        .map(|b| {
            let tet = elements[b.element];
            (0..4).fold(Point3::zeros(), |acc, k| acc + vertices[tet[k]] * b.weights[k])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TetrahedralMesh;
    use alloc::vec;

    fn unit_tet() -> TetrahedralMesh {
        TetrahedralMesh::new(
            vec![Point3::zeros(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0), Point3::new(0.0, 0.0, 1.0)],
            vec![[0, 1, 2, 3]],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn vertex_and_centroid_weights() {
        let m = unit_tet();
        let b = bind_barycentric(&[Point3::new(1.0, 0.0, 0.0), Point3::new(0.25, 0.25, 0.25)], &m).unwrap();
        assert_eq!(b[0].weights, [0.0, 1.0, 0.0, 0.0]);
        for w in b[1].weights {
            assert!((w - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn far_point_reports_distance() {
        let m = unit_tet();
        match bind_barycentric(&[Point3::new(0.2, 0.2, -1.0)], &m) {
            Err(Error::Binding { index: 0, distance }) => assert!((distance - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn near_point_is_snapped() {
        let m = unit_tet();
        let b = bind_barycentric(&[Point3::new(0.2, 0.2, -0.05)], &m).unwrap();
        let q = apply_deformation(&b, m.tetrahedra(), m.vertices());
        assert!((q[0] - Point3::new(0.2, 0.2, 0.0)).norm() < 1e-12);
        assert!(b[0].weights.iter().all(|&w| w >= 0.0));
    }
}
