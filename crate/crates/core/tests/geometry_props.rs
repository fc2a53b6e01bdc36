use std::collections::BTreeMap;

use nalgebra::{Matrix3, Rotation3};
use pneumoreg_core::geometry::{
    apply_deformation, bind_barycentric, cotangent_weights, discrete_laplacian, DeformationGrid, LaplacianKind,
    LaplacianOperator, Point3, TriangleSurface, Vec3,
};
use pneumoreg_core::phantom::{generate_lobe, PhantomSpec};
use proptest::prelude::*;

fn lobe(seed: u64) -> pneumoreg_core::geometry::LobeModel {
    generate_lobe(&PhantomSpec { seed, target_triangles: 200, branching_depth: 3, ..PhantomSpec::default() }).unwrap()
}

fn vec3() -> impl Strategy<Value = Vec3> {
    proptest::array::uniform3(-1.0f64..1.0).prop_map(Vec3::from)
}

/// A well-conditioned linear map: rotation times a diagonal stretch.
fn linear() -> impl Strategy<Value = Matrix3<f64>> {
    (vec3(), 0.0f64..3.0, proptest::array::uniform3(0.6f64..1.6)).prop_map(|(axis, angle, d)| {
        let axis = if axis.norm() < 1e-3 { Vec3::z() } else { axis };
        Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).into_inner()
            * Matrix3::from_diagonal(&Vec3::from(d))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn binding_round_trips_through_the_lobe_mesh(seed in 0u64..50) {
        let m = lobe(seed);
        let mut points = m.centerline().positions();
        points.extend_from_slice(m.surface().vertices());
        let b = bind_barycentric(&points, m.tet_mesh()).unwrap();
        let back = apply_deformation(&b, m.tet_mesh().tetrahedra(), m.tet_mesh().vertices());
        for (p, q) in points.iter().zip(&back) {
            prop_assert!((p - q).norm() < 1e-9);
        }
    }

    #[test]
    fn affine_control_motion_moves_embedded_points_affinely(
        seed in 0u64..50,
        a in linear(),
        t in vec3(),
        cells in proptest::array::uniform3(1usize..5),
    ) {
        let m = lobe(seed);
        let mut grid = DeformationGrid::around_model(&m, cells, 5.0).unwrap();
        let points = m.all_points();
        let b = bind_barycentric(&points, &grid).unwrap();
        let map = |p: &Point3| a * p + t * 10.0;
        let disp: Vec<Vec3> = grid.rest_vertices().iter().map(|p| map(p) - p).collect();
        grid.set_displacement(disp).unwrap();
        let moved = apply_deformation(&b, grid.tetrahedra(), &grid.deformed_vertices());
        for (p, q) in points.iter().zip(&moved) {
            prop_assert!((map(p) - q).norm() < 1e-9);
        }
    }

    #[test]
    fn interior_grid_faces_are_shared_by_two_cells(cells in proptest::array::uniform3(1usize..6)) {
        let m = lobe(0);
        let g = DeformationGrid::around_model(&m, cells, 3.0).unwrap();
        let mut faces: BTreeMap<[usize; 3], usize> = BTreeMap::new();
        for tet in g.tetrahedra() {
            for skip in 0..4 {
                let mut f: Vec<usize> = (0..4).filter(|&i| i != skip).map(|i| tet[i]).collect();
                f.sort_unstable();
                *faces.entry([f[0], f[1], f[2]]).or_insert(0) += 1;
            }
        }
        let r = g.rest_vertices();
        let (lo, hi) = (r[0], r[r.len() - 1]);
        for (f, n) in faces {
            let outer = (0..3).any(|k| {
                f.iter().all(|&v| (r[v][k] - lo[k]).abs() < 1e-9) || f.iter().all(|&v| (r[v][k] - hi[k]).abs() < 1e-9)
            });
            prop_assert_eq!(n, if outer { 1 } else { 2 });
        }
    }

    #[test]
    fn laplacian_of_a_constant_is_zero(seed in 0u64..50, c in vec3(), cot in any::<bool>()) {
        let m = lobe(seed);
        let kind = if cot { LaplacianKind::Cotangent } else { LaplacianKind::Uniform };
        let l = LaplacianOperator::for_surface(m.surface(), kind).unwrap();
        let out = l.apply(&vec![c * 50.0; m.surface().len()]);
        prop_assert!(out.iter().all(|v| v.norm() < 1e-9));
    }

    /// A fan of triangles around a planar interior vertex, lifted into a
    /// random plane; linear fields have zero cotangent Laplacian there.
    #[test]
    fn cotangent_laplacian_kills_linear_fields_on_planar_rings(
        radii in proptest::collection::vec(0.5f64..2.0, 5..9),
        rot in linear(),
        grad in proptest::array::uniform3(vec3()),
    ) {
        let n = radii.len();
        let mut flat = vec![Point3::zeros()];
        flat.extend(radii.iter().enumerate().map(|(k, r)| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            Point3::new(r * a.cos(), r * a.sin(), 0.0)
        }));
        let vertices: Vec<Point3> = flat.iter().map(|p| rot * p).collect();
        let triangles: Vec<[usize; 3]> = (0..n).map(|k| [0, 1 + k, 1 + (k + 1) % n]).collect();
        let s = TriangleSurface::new(vertices.clone(), triangles).unwrap();
        let w = cotangent_weights(&s).unwrap();
        let g = Matrix3::from_columns(&grad);
        let field: Vec<Vec3> = vertices.iter().map(|p| g * p).collect();
        let l = discrete_laplacian(&field, &s.vertex_adjacency(), &w).unwrap();
        prop_assert!(l[0].norm() < 1e-9, "{}", l[0].norm());
    }
}
