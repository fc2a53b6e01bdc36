//! Low-level predicates on points, segments, triangles and tetrahedra.

use super::{Point3, Vec3};

/// Signed volume of the tetrahedron `(a, b, c, d)`; positive when `d` lies on
/// the side of `(a, b, c)` that the right-hand normal points away from.
pub fn tet_signed_volume(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a))) / 6.0
}

/// Unnormalized triangle normal (twice the area times the unit normal).
pub fn triangle_area_vector(a: &Point3, b: &Point3, c: &Point3) -> Vec3 {
    (b - a).cross(&(c - a))
}

pub fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    0.5 * triangle_area_vector(a, b, c).norm()
}

/// Closest point on segment `[a, b]` to `p`, returned as the segment parameter
/// `t` in `[0, 1]` and the distance.
pub fn point_segment(p: &Point3, a: &Point3, b: &Point3) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let q = a + ab * t;
    (t, (p - q).norm())
}

/// Closest point on triangle `(a, b, c)` to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
pub fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Barycentric coordinates of `p` with respect to the tetrahedron
/// `(a, b, c, d)`. Returns `None` for a degenerate tetrahedron.
pub fn tet_barycentric(p: &Point3, a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> Option<[f64; 4]> {
    let vol = tet_signed_volume(a, b, c, d);
    if vol.abs() < 1e-300 {
        return None;
    }
    let wa = tet_signed_volume(p, b, c, d) / vol;
    let wb = tet_signed_volume(a, p, c, d) / vol;
    let wc = tet_signed_volume(a, b, p, d) / vol;
    let wd = 1.0 - wa - wb - wc;
    Some([wa, wb, wc, wd])
}

/// Euclidean distance from `p` to the solid tetrahedron `(a, b, c, d)`
/// (zero when inside).
pub fn point_tet_distance(p: &Point3, v: [&Point3; 4]) -> (f64, Point3) {
    if let Some(w) = tet_barycentric(p, v[0], v[1], v[2], v[3]) {
        if w.iter().all(|&x| x >= 0.0) {
            return (0.0, *p);
        }
    }
    const FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];
    let mut best = (f64::INFINITY, *p);
    for f in FACES {
        let q = closest_point_on_triangle(p, v[f[0]], v[f[1]], v[f[2]]);
        let d = (p - q).norm();
        if d < best.0 {
            best = (d, q);
        }
    }
    best
}

/// Möller–Trumbore ray/triangle intersection. Returns the ray parameter and the
/// barycentric weights `(w0, w1, w2)` of the hit point.
pub fn ray_triangle(origin: &Point3, dir: &Vec3, a: &Point3, b: &Point3, c: &Point3) -> Option<(f64, [f64; 3])> {
    const EPS: f64 = 1e-14;
    let e1 = b - a;
    let e2 = c - a;
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < EPS * e1.norm() * e2.norm() * dir.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = inv * s.dot(&h);
    const TOL: f64 = 1e-12;
    if !(-TOL..=1.0 + TOL).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = inv * dir.dot(&q);
    if v < -TOL || u + v > 1.0 + TOL {
        return None;
    }
    let t = inv * e2.dot(&q);
    Some((t, [1.0 - u - v, u, v]))
}
