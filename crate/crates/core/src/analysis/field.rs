use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{LobeModel, Point3, Vec3};

/// Points closer than this to the hilum have no radial direction.
pub const HILUM_EPS: f64 = 1e-6;

/// Reference positions and displacements of one vertex set, both relative
/// to the hilum of their state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldPart {
    pub origin: Vec<Vec3>,
    pub displacement: Vec<Vec3>,
}

impl FieldPart {
    fn between(before: &[Point3], h0: &Point3, after: &[Point3], h1: &Point3) -> Self {
        let origin: Vec<Vec3> = before.iter().map(|v| v - h0).collect();
        let displacement = after.iter().zip(&origin).map(|(w, o)| (w - h1) - o).collect();
        Self { origin, displacement }
    }

    pub fn len(&self) -> usize {
        self.origin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origin.is_empty()
    }

    /// Deformed positions, hilum at the origin.
    pub fn deformed(&self) -> Vec<Vec3> {
        self.origin.iter().zip(&self.displacement).map(|(o, u)| o + u).collect()
    }
}

/// `u_i = φ(v_i) − v_i` for every vertex of a lobe model, expressed with the
/// hilum of each state at the origin so the hilum itself does not move.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    pub hilum: Point3,
    pub surface: FieldPart,
    pub tet: FieldPart,
    pub centerline: FieldPart,
}

impl DeformationField {
    /// Field from a source model to a deformed copy with the same topology.
    pub fn between(source: &LobeModel, deformed: &LobeModel) -> Result<Self> {
        let counts = |m: &LobeModel| (m.surface().len(), m.tet_mesh().vertices().len(), m.centerline().len());
        if counts(source) != counts(deformed) {
            return Err(Error::InvalidArgument(format!(
                "deformed model has {:?} surface/tet/centerline vertices, source has {:?}",
                counts(deformed),
                counts(source)
            )));
        }
        let (h0, h1) = (source.hilum(), deformed.hilum());
        let cs: Vec<Point3> = source.centerline().positions();
        let cd: Vec<Point3> = deformed.centerline().positions();
        Ok(Self {
            hilum: h0,
            surface: FieldPart::between(source.surface().vertices(), &h0, deformed.surface().vertices(), &h1),
            tet: FieldPart::between(source.tet_mesh().vertices(), &h0, deformed.tet_mesh().vertices(), &h1),
            centerline: FieldPart::between(&cs, &h0, &cd, &h1),
        })
    }

    /// Field of an analytic map applied to every vertex of `source`.
    pub fn from_map(source: &LobeModel, map: impl Fn(&Point3) -> Point3) -> Self {
        let h0 = source.hilum();
        let h1 = map(&h0);
        let part = |pts: &[Point3]| {
            let moved: Vec<Point3> = pts.iter().map(&map).collect();
            FieldPart::between(pts, &h0, &moved, &h1)
        };
        Self {
            hilum: h0,
            surface: part(source.surface().vertices()),
            tet: part(source.tet_mesh().vertices()),
            centerline: part(&source.centerline().positions()),
        }
    }

    /// Displacement of the centerline root; zero by construction.
    pub fn hilum_displacement(&self, root: usize) -> Vec3 {
        self.centerline.displacement.get(root).copied().unwrap_or_else(Vec3::zeros)
    }
}

/// Contraction (radial) and rotation parts of one displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub contraction: Vec3,
    pub rotation: Vec3,
}

/// Splits `φv − v` into `s = ((|φv| − |v|)/|v|)·v` and `r = (φv − v) − s`,
/// with the hilum at the origin.
pub fn decompose_displacement(v: &Vec3, phi_v: &Vec3) -> Result<Decomposition> {
    let n = v.norm();
    if n <= HILUM_EPS {
        return Err(Error::AtHilum);
    }
    let contraction = v * ((phi_v.norm() - n) / n);
    Ok(Decomposition { contraction, rotation: (phi_v - v) - contraction })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FieldComponent {
    Displacement,
    Contraction,
    Rotation,
}

impl FieldComponent {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldComponent::Displacement => "displacement",
            FieldComponent::Contraction => "contraction",
            FieldComponent::Rotation => "rotation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldRecord {
    pub origin: Vec3,
    pub vector: Vec3,
    pub magnitude: f64,
}

/// One record per surface vertex followed by one per centerline node.
/// Points at the hilum carry their whole displacement as rotation.
pub fn field_records(field: &DeformationField, component: FieldComponent) -> Vec<FieldRecord> {
    [&field.surface, &field.centerline]
        .into_iter()
        .flat_map(|part| part.origin.iter().zip(&part.displacement))
        .map(|(o, u)| {
            let vector = match component {
                FieldComponent::Displacement => *u,
                _ => {
                    let d = decompose_displacement(o, &(o + u))
                        .unwrap_or(Decomposition { contraction: Vec3::zeros(), rotation: *u });
                    if component == FieldComponent::Contraction {
                        d.contraction
                    } else {
                        d.rotation
                    }
                }
            };
            FieldRecord { origin: *o, vector, magnitude: vector.norm() }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn radial_only() {
        let d = decompose_displacement(&v(10., 0., 0.), &v(7., 0., 0.)).unwrap();
        assert_eq!(d.contraction, v(-3., 0., 0.));
        assert_eq!(d.rotation, v(0., 0., 0.));
    }

    #[test]
    fn rotation_only() {
        let d = decompose_displacement(&v(10., 0., 0.), &v(0., 10., 0.)).unwrap();
        assert_eq!(d.contraction, v(0., 0., 0.));
        assert_eq!(d.rotation, v(-10., 10., 0.));
    }

    #[test]
    fn mixed() {
        let d = decompose_displacement(&v(10., 0., 0.), &v(0., 7., 0.)).unwrap();
        assert_eq!(d.contraction, v(-3., 0., 0.));
        assert_eq!(d.rotation, v(-7., 7., 0.));
        assert_eq!(d.contraction + d.rotation, v(-10., 7., 0.));
    }

    #[test]
    fn hilum_point_rejected() {
        assert_eq!(decompose_displacement(&v(0., 0., 5e-7), &v(1., 0., 0.)), Err(Error::AtHilum));
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y, z)| v(x, y, z))
    }

    proptest! {
        #[test]
        fn parts_sum_to_displacement(p in vec3(), q in vec3()) {
            prop_assume!(p.norm() > 1e-3);
            let d = decompose_displacement(&p, &q).unwrap();
            let u = q - p;
            prop_assert!((d.contraction + d.rotation - u).norm() <= 1e-12 * (1.0 + u.norm()));
        }

        #[test]
        fn scaling_is_pure_contraction(p in vec3(), k in 0.1..2.0f64) {
            prop_assume!(p.norm() > 1e-3);
            let d = decompose_displacement(&p, &(p * k)).unwrap();
            prop_assert!(d.rotation.norm() < 1e-9);
            prop_assert!((d.contraction.norm() / p.norm() - (k - 1.0).abs()).abs() < 1e-9);
        }

        #[test]
        fn rotation_is_pure_rotation(p in vec3(), axis in vec3(), angle in -3.0..3.0f64) {
            prop_assume!(p.norm() > 1e-3 && axis.norm() > 1e-3);
            let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
            let d = decompose_displacement(&p, &(r * p)).unwrap();
            prop_assert!(d.contraction.norm() < 1e-9);
        }
    }
}
