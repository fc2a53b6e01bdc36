use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Rotation3, Unit};

use super::lobe::ellipsoid_radius;
use super::PhantomSpec;
use crate::error::{Error, Result};
use crate::geometry::{LobeModel, Point3, Vec3};

/// Radial contraction towards the hilum followed by a rotation about it.
/// The contraction strain is `bronchus_strain` out to the bronchus radius of
/// each direction and `parenchyma_strain` beyond, joined by a cosine ramp.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthDeformation {
    pub hilum: Point3,
    pub half_axes: [f64; 3],
    pub bronchus_fraction: f64,
    pub bronchus_strain: f64,
    pub parenchyma_strain: f64,
    pub blend_band_mm: f64,
    pub rotation: Rotation3<f64>,
}

impl GroundTruthDeformation {
    pub fn from_spec(spec: &PhantomSpec) -> Self {
        let axis = Vec3::from(spec.rotation_axis);
        let rotation = if spec.rotation_deg == 0.0 || axis.norm() == 0.0 {
            Rotation3::identity()
        } else {
            Rotation3::from_axis_angle(&Unit::new_normalize(axis), spec.rotation_deg.to_radians())
        };
        Self {
            hilum: Point3::from(spec.center),
            half_axes: spec.half_axes,
            bronchus_fraction: spec.bronchus_fraction,
            bronchus_strain: spec.bronchus_strain,
            parenchyma_strain: spec.parenchyma_strain,
            blend_band_mm: spec.blend_band_mm,
            rotation,
        }
    }

    /// Radius at which the parenchyma region starts along unit `dir`.
    pub fn bronchus_radius(&self, dir: &Vec3) -> f64 {
        self.bronchus_fraction * ellipsoid_radius(&self.half_axes, dir)
    }

    /// Integral of the strain profile from the hilum out to `r`.
    fn contraction(&self, r: f64, rb: f64) -> f64 {
        let (eb, ep) = (self.bronchus_strain, self.parenchyma_strain);
        if r <= rb {
            return eb * r;
        }
        let x = r - rb;
        let w = self.blend_band_mm;
        let ramp = if w == 0.0 || x >= w {
            0.5 * w + (x - w)
        } else {
            let t = x / w;
            w * (0.5 * t - libm::sin(PI * t) / (2.0 * PI))
        };
        eb * r + (ep - eb) * ramp
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        let rel = p - self.hilum;
        let r = rel.norm();
        if r < 1e-12 {
            return self.hilum;
        }
        let c = self.contraction(r, self.bronchus_radius(&(rel / r)));
        self.hilum + self.rotation * (rel * (1.0 - c / r))
    }

    pub fn apply_all(&self, points: &[Point3]) -> Vec<Point3> {
        points.iter().map(|p| self.apply(p)).collect()
    }
}

/// Deforms every vertex and centerline node of `model`. Vertex and node
/// indices are preserved, so the correspondence is the identity.
pub fn apply_ground_truth_deformation(
    model: &LobeModel,
    spec: &PhantomSpec,
) -> Result<(LobeModel, GroundTruthDeformation)> {
    spec.validate()?;
    if spec.bronchus_strain >= 1.0 || spec.parenchyma_strain >= 1.0 {
        return Err(Error::Spec("contraction strain of 1 or more collapses the lobe onto the hilum".into()));
    }
    let gt = GroundTruthDeformation::from_spec(spec);
    let surface = model
        .surface()
        .with_vertices(gt.apply_all(model.surface().vertices()))
        .map_err(|e| Error::Spec(format!("deformation degenerates the surface: {e}")))?;
    let tet = model.tet_mesh();
    let moved = gt.apply_all(tet.vertices());
    if let Some(t) = tet.first_non_positive(&moved) {
        return Err(Error::Spec(format!("deformation inverts tetrahedron {t}")));
    }
    let tet = tet.with_vertices_unchecked(moved);
    for (t, tri) in surface.triangles().iter().enumerate() {
        let before = model.surface().triangle_normal(t);
        let after = surface.triangle_normal(t);
        if (gt.rotation * before).dot(&after) <= 0.0 {
            return Err(Error::Spec(format!("deformation folds surface triangle {t} {tri:?}")));
        }
    }
    let centerline = model.centerline().with_positions(&gt.apply_all(&model.centerline().positions()))?;
    Ok((LobeModel::from_parts(model.label(), surface, tet, centerline), gt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::generate_lobe;

    fn spec(eb: f64, ep: f64, deg: f64) -> PhantomSpec {
        PhantomSpec { bronchus_strain: eb, parenchyma_strain: ep, rotation_deg: deg, ..PhantomSpec::default() }
    }

    #[test]
    fn zero_strain_no_rotation_is_identity() {
        let s = spec(0.0, 0.0, 0.0);
        let m = generate_lobe(&s).unwrap();
        let (d, _) = apply_ground_truth_deformation(&m, &s).unwrap();
        assert_eq!(d.surface().vertices(), m.surface().vertices());
        assert_eq!(d.centerline().positions(), m.centerline().positions());
    }

    #[test]
    fn rotation_preserves_norms() {
        let s = spec(0.0, 0.0, 25.0);
        let m = generate_lobe(&s).unwrap();
        let (d, _) = apply_ground_truth_deformation(&m, &s).unwrap();
        for (a, b) in m.surface().vertices().iter().zip(d.surface().vertices()) {
            assert!((a.norm() - b.norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn contraction_shrinks_volume() {
        let s = spec(0.292, 0.395, 15.0);
        let m = generate_lobe(&s).unwrap();
        let (d, _) = apply_ground_truth_deformation(&m, &s).unwrap();
        assert!(d.tet_mesh().total_volume() < m.tet_mesh().total_volume());
    }

    #[test]
    fn profile_is_continuous_and_piecewise() {
        let gt = GroundTruthDeformation::from_spec(&spec(0.2, 0.4, 0.0));
        let rb = 10.0;
        assert!((gt.contraction(5.0, rb) - 1.0).abs() < 1e-12);
        // beyond the band the slope is the parenchyma strain
        let slope = gt.contraction(20.0, rb) - gt.contraction(19.0, rb);
        assert!((slope - 0.4).abs() < 1e-12);
        // band midpoint: bronchus part plus half the band at the mean strain excess
        assert!((gt.contraction(12.0, rb) - (0.2 * 12.0 + 0.2 * 1.0)).abs() < 1e-12);
        let eps = 1e-7;
        for r in [rb, rb + 2.0] {
            let left = (gt.contraction(r, rb) - gt.contraction(r - eps, rb)) / eps;
            let right = (gt.contraction(r + eps, rb) - gt.contraction(r, rb)) / eps;
            assert!((left - right).abs() < 1e-5);
        }
    }

    #[test]
    fn full_collapse_rejected() {
        let s = spec(1.0, 0.3, 0.0);
        let m = generate_lobe(&PhantomSpec::default()).unwrap();
        assert!(matches!(apply_ground_truth_deformation(&m, &s), Err(Error::Spec(_))));
    }
}
