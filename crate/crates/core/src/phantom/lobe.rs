use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use super::PhantomSpec;
use crate::error::{Error, Result};
use crate::geometry::{
    primitives::tet_signed_volume, CenterlineTree, LobeModel, Point3, TetrahedralMesh, TriangleSurface, Vec3,
};

const STREAM_TREE: u64 = 1;

/// Distance from the ellipsoid centre to its surface along unit `dir`.
pub(crate) fn ellipsoid_radius(half_axes: &[f64; 3], dir: &Vec3) -> f64 {
    let s = (dir.x / half_axes[0]).powi(2) + (dir.y / half_axes[1]).powi(2) + (dir.z / half_axes[2]).powi(2);
    1.0 / libm::sqrt(s)
}

/// Ring and segment counts whose UV triangulation has `2 · rings · segments`
/// triangles, close to `target`.
fn ring_layout(target: usize) -> (usize, usize) {
    let rings = (libm::round(libm::sqrt(target as f64 / 5.0)) as usize).max(3);
    let segments = (libm::round(target as f64 / (2.0 * rings as f64)) as usize).max(3);
    (rings, segments)
}

/// Closed UV ellipsoid plus a tetrahedralization built from a spine of
/// interior points on the z axis: every surface triangle forms a tetrahedron
/// with the spine point of its latitude band, and the gap between two spine
/// points is filled by one tetrahedron per ring edge.
fn ellipsoid_meshes(spec: &PhantomSpec) -> Result<(TriangleSurface, TetrahedralMesh)> {
    let [a, b, c] = spec.half_axes;
    let center = Point3::from(spec.center);
    let (rings, segs) = ring_layout(spec.target_triangles);
    let theta = |r: usize| PI * (r + 1) as f64 / (rings + 1) as f64;
    let ring_z = |r: usize| c * libm::cos(theta(r));

    let mut verts = vec![center + Vec3::new(0.0, 0.0, c)];
    for r in 0..rings {
        let (st, ct) = (libm::sin(theta(r)), libm::cos(theta(r)));
        for i in 0..segs {
            let phi = 2.0 * PI * (i as f64 + 0.5 * (r % 2) as f64) / segs as f64;
            verts.push(center + Vec3::new(a * st * libm::cos(phi), b * st * libm::sin(phi), c * ct));
        }
    }
    verts.push(center - Vec3::new(0.0, 0.0, c));
    let top = 0;
    let bottom = verts.len() - 1;
    let at = |r: usize, i: usize| 1 + r * segs + i % segs;

    // triangles tagged with their latitude band (0 = top cap, rings = bottom cap)
    let mut tris: Vec<([usize; 3], usize)> = Vec::new();
    for i in 0..segs {
        tris.push(([top, at(0, i), at(0, i + 1)], 0));
    }
    for r in 0..rings - 1 {
        for i in 0..segs {
            // odd rings are rotated half a segment forward
            let (ai, an) = (at(r, i), at(r, i + 1));
            let (bi, bn) = (at(r + 1, i), at(r + 1, i + 1));
            if r % 2 == 0 {
                tris.push(([ai, bi, an], r + 1));
                tris.push(([an, bi, bn], r + 1));
            } else {
                tris.push(([ai, bi, bn], r + 1));
                tris.push(([ai, bn, an], r + 1));
            }
        }
    }
    for i in 0..segs {
        tris.push(([bottom, at(rings - 1, i + 1), at(rings - 1, i)], rings));
    }
    let surface = TriangleSurface::new_closed(verts.clone(), tris.iter().map(|t| t.0).collect())?;

    // spine: one point per band, the caps sharing with their neighbour band
    let spine_count = rings - 1;
    let spine_of_band = |band: usize| band.saturating_sub(1).min(spine_count - 1);
    let spine_start = verts.len();
    let mut tet_verts = verts;
    for k in 0..spine_count {
        let z = 0.5 * (ring_z(k) + ring_z(k + 1));
        tet_verts.push(center + Vec3::new(0.0, 0.0, z));
    }
    let oriented = |mut t: [usize; 4], v: &[Point3]| {
        if tet_signed_volume(&v[t[0]], &v[t[1]], &v[t[2]], &v[t[3]]) < 0.0 {
            t.swap(0, 1);
        }
        t
    };
    let mut tets = Vec::new();
    for &(t, band) in &tris {
        tets.push(oriented([t[0], t[1], t[2], spine_start + spine_of_band(band)], &tet_verts));
    }
    for ring in 1..rings - 1 {
        let (up, down) = (spine_start + ring - 1, spine_start + ring);
        for i in 0..segs {
            tets.push(oriented([at(ring, i), at(ring, i + 1), up, down], &tet_verts));
        }
    }
    let tet = TetrahedralMesh::new(tet_verts, tets, (0..surface.len()).collect())?;
    Ok((surface, tet))
}

struct TreeBuilder<'a> {
    spec: &'a PhantomSpec,
    hilum: Point3,
    positions: Vec<Point3>,
    parents: Vec<Option<usize>>,
}

impl TreeBuilder<'_> {
    fn push(&mut self, p: Point3, parent: usize) -> usize {
        // straight polyline with evenly spaced internal nodes
        let from = self.positions[parent];
        let pieces = libm::ceil((p - from).norm() / self.spec.max_segment_mm).max(1.0) as usize;
        let mut prev = parent;
        for k in 1..pieces {
            self.positions.push(from + (p - from) * (k as f64 / pieces as f64));
            self.parents.push(Some(prev));
            prev = self.positions.len() - 1;
        }
        self.positions.push(p);
        self.parents.push(Some(prev));
        self.positions.len() - 1
    }

    fn place(&self, dir: &Vec3, fraction: f64) -> Point3 {
        self.hilum + dir * (fraction * self.spec.bronchus_fraction * ellipsoid_radius(&self.spec.half_axes, dir))
    }

    fn grow(&mut self, mut dirs: Vec<Vec3>, level: usize, parent: usize, rng: &mut impl Rng) -> Result<()> {
        if dirs.len() == 1 {
            let p = self.place(&dirs[0], 1.0);
            self.push(p, parent);
            return Ok(());
        }
        let mean = dirs.iter().fold(Vec3::zeros(), |acc, d| acc + d) / dirs.len() as f64;
        if mean.norm() < 0.05 {
            return Err(Error::Spec("branch directions cancel out; narrow branch_cone_deg".into()));
        }
        let depth = self.spec.branching_depth as f64;
        let fraction = 0.12 + 0.76 * level as f64 / depth + rng.gen_range(-0.02..0.02);
        let p = self.place(&mean.normalize(), fraction);
        let node = self.push(p, parent);
        // split along the coordinate with the widest spread
        let spread = |k: usize| {
            let m = mean[k];
            dirs.iter().map(|d| (d[k] - m) * (d[k] - m)).sum::<f64>()
        };
        let axis = (0..3).max_by(|&i, &j| spread(i).total_cmp(&spread(j))).unwrap_or(0);
        dirs.sort_by(|u, v| u[axis].total_cmp(&v[axis]));
        let rest = dirs.split_off(dirs.len() / 2);
        self.grow(dirs, level + 1, node, rng)?;
        self.grow(rest, level + 1, node, rng)
    }
}

fn generate_tree(spec: &PhantomSpec) -> Result<CenterlineTree> {
    let mut rng = spec.rng(STREAM_TREE);
    let n = 1usize << spec.branching_depth;
    let cos_cone = libm::cos(spec.branch_cone_deg.to_radians());
    let golden = PI * (3.0 - libm::sqrt(5.0));
    let offset = rng.gen_range(0.0..2.0 * PI);
    let dirs: Vec<Vec3> = (0..n)
        .map(|i| {
            let u = (i as f64 + 0.5 + rng.gen_range(-0.25..0.25)) / n as f64;
            let cz = 1.0 - (1.0 - cos_cone) * u;
            let sz = libm::sqrt((1.0 - cz * cz).max(0.0));
            let phi = offset + golden * i as f64 + rng.gen_range(-0.1..0.1);
            Vec3::new(sz * libm::cos(phi), sz * libm::sin(phi), cz)
        })
        .collect();
    let hilum = Point3::from(spec.center);
    let mut builder = TreeBuilder { spec, hilum, positions: vec![hilum], parents: vec![None] };
    builder.grow(dirs, 0, 0, &mut rng)?;
    CenterlineTree::from_parents(&builder.positions, &builder.parents)
}

/// Ellipsoidal lobe with a bifurcating bronchial tree rooted at the hilum
/// (the ellipsoid centre). Deterministic in `spec.seed`.
pub fn generate_lobe(spec: &PhantomSpec) -> Result<LobeModel> {
    spec.validate()?;
    let (surface, tet) = ellipsoid_meshes(spec)?;
    let tree = generate_tree(spec)?;
    LobeModel::new(spec.label, surface, tet, tree).map_err(|e| match e {
        Error::Invariant { name: "centerline embedded in tet mesh", detail } => {
            Error::Spec(alloc::format!("branches leave the lobe: {detail}"))
        }
        other => other,
    })
}
