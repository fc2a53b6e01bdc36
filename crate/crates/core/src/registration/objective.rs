//! The registration objective over a linear control model.
//!
//! Every tracked position (surface vertex, tet vertex, centerline node) is
//! `base + Σ_j c_j θ_j` for control vectors `θ_j ∈ R³`, with scalar
//! coefficients shared by the three coordinates. The affine, grid and surface
//! steps differ only in how those coefficients are built.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::distance::{closest_segment, match_vertices, CorrespondencePair, SegmentMatch};
use crate::geometry::primitives::tet_signed_volume;
use crate::geometry::{compute_vertex_normals, Point3, Vec3};

/// Sparse rows: for each tracked point, `(control index, coefficient)`.
pub(crate) type Rows = Vec<Vec<(usize, f64)>>;

/// Residual norms below this are treated as this, keeping the reweighting
/// finite once a point lands on its match.
const RESIDUAL_FLOOR: f64 = 1e-9;

/// Total `E = d_s² + α d_c² + β Σ‖L u‖²` and its three terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObjectiveBreakdown {
    pub total: f64,
    /// `d_s²`
    pub surface_term: f64,
    /// `α · d_c²`
    pub centerline_term: f64,
    /// `β · Σ‖L u‖²`
    pub regularization_term: f64,
}

impl ObjectiveBreakdown {
    pub(crate) fn new(surface_term: f64, centerline_term: f64, regularization_term: f64) -> Self {
        Self {
            total: surface_term + centerline_term + regularization_term,
            surface_term,
            centerline_term,
            regularization_term,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LinearMap {
    pub base: Vec<Point3>,
    pub rows: Rows,
}

impl LinearMap {
    pub fn eval(&self, theta: &[Vec3]) -> Vec<Point3> {
        self.base
            .iter()
            .zip(&self.rows)
            .map(|(b, row)| row.iter().fold(*b, |acc, &(j, c)| acc + theta[j] * c))
            .collect()
    }

    /// Largest displacement `|Σ c δ_j|` over all points.
    pub fn max_displacement(&self, delta: &[Vec3]) -> f64 {
        self.rows
            .iter()
            .map(|row| row.iter().fold(Vec3::zeros(), |acc, &(j, c)| acc + delta[j] * c).norm())
            .fold(0.0, f64::max)
    }
}

/// Target geometry one lobe is pulled towards.
#[derive(Debug, Clone)]
pub(crate) struct Target {
    pub surface: Vec<Point3>,
    pub normals: Vec<Vec3>,
    pub centerline: Vec<Point3>,
}

/// One source lobe driven by the shared control vectors.
#[derive(Debug, Clone)]
pub(crate) struct Part {
    pub target: Target,
    pub surface: LinearMap,
    pub triangles: Vec<[usize; 3]>,
    pub tet: LinearMap,
    pub tets: Vec<[usize; 4]>,
    pub centerline: LinearMap,
    pub segments: Vec<(usize, usize)>,
    /// Triangle normals that accepted states must keep agreeing with.
    pub fold_reference: Option<Vec<Vec3>>,
}

/// Admissibility test on the control vectors themselves.
#[derive(Debug, Clone)]
pub(crate) enum Guard {
    None,
    /// `θ_0..θ_2` are the columns of `A − I`; `det A` must stay above this.
    Affine {
        min_det: f64,
    },
    /// Control vectors displace these grid vertices; no tet may invert.
    Grid {
        rest: Vec<Point3>,
        tets: Vec<[usize; 4]>,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub parts: Vec<Part>,
    pub controls: usize,
    pub regularizer: Rows,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub guard: Guard,
}

/// Correspondences of one part, frozen for gradient evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Matches {
    pub forward: Vec<CorrespondencePair>,
    pub backward: Vec<CorrespondencePair>,
    pub centerline: Vec<SegmentMatch>,
}

/// Positions of one part under some control vectors.
#[derive(Debug, Clone)]
pub(crate) struct Placement {
    pub surface: Vec<Point3>,
    pub centerline: Vec<Point3>,
}

#[derive(Debug, Clone)]
pub(crate) struct State {
    pub theta: Vec<Vec3>,
    pub placements: Vec<Placement>,
    pub matches: Vec<Matches>,
    pub breakdown: ObjectiveBreakdown,
}

pub(crate) fn affine_det(theta: &[Vec3]) -> f64 {
    let a =
        nalgebra::Matrix3::from_columns(&[theta[0], theta[1], theta[2]]).transpose() + nalgebra::Matrix3::identity();
    a.determinant()
}

fn segment_point(placed: &[Point3], segments: &[(usize, usize)], m: &SegmentMatch) -> Point3 {
    if m.segment == usize::MAX {
        return placed[0];
    }
    let (a, b) = segments[m.segment];
    placed[a] * (1.0 - m.t) + placed[b] * m.t
}

/// Control-row combination for a point on a source segment.
fn segment_row(rows: &Rows, segments: &[(usize, usize)], m: &SegmentMatch) -> Vec<(usize, f64)> {
    if m.segment == usize::MAX {
        return rows[0].clone();
    }
    let (a, b) = segments[m.segment];
    let mut out: Vec<(usize, f64)> = rows[a].iter().map(|&(j, c)| (j, c * (1.0 - m.t))).collect();
    for &(j, c) in &rows[b] {
        match out.iter_mut().find(|(k, _)| *k == j) {
            Some(e) => e.1 += c * m.t,
            None => out.push((j, c * m.t)),
        }
    }
    out
}

impl Problem {
    pub fn zero_controls(&self) -> Vec<Vec3> {
        vec![Vec3::zeros(); self.controls]
    }

    fn guard_ok(&self, theta: &[Vec3]) -> bool {
        match &self.guard {
            Guard::None => true,
            Guard::Affine { min_det } => affine_det(theta) >= *min_det,
            Guard::Grid { rest, tets } => tets.iter().all(|t| {
                let p = |k: usize| rest[t[k]] + theta[t[k]];
                tet_signed_volume(&p(0), &p(1), &p(2), &p(3)) > 0.0
            }),
        }
    }

    /// Positions of every part, or `None` when the configuration inverts a
    /// tetrahedron or folds the surface.
    pub fn place(&self, theta: &[Vec3]) -> Option<Vec<Placement>> {
        if !self.guard_ok(theta) {
            return None;
        }
        self.parts
            .iter()
            .map(|part| {
                let tet = part.tet.eval(theta);
                let inverted = part
                    .tets
                    .iter()
                    .any(|t| !(tet_signed_volume(&tet[t[0]], &tet[t[1]], &tet[t[2]], &tet[t[3]]) > 0.0));
                if inverted {
                    return None;
                }
                let surface = part.surface.eval(theta);
                if let Some(reference) = &part.fold_reference {
                    let folded = part.triangles.iter().zip(reference).any(|(t, n)| {
                        let normal = (surface[t[1]] - surface[t[0]]).cross(&(surface[t[2]] - surface[t[0]]));
                        !(normal.dot(n) > 0.0)
                    });
                    if folded {
                        return None;
                    }
                }
                Some(Placement { surface, centerline: part.centerline.eval(theta) })
            })
            .collect()
    }

    fn correspond(&self, placements: &[Placement]) -> Option<Vec<Matches>> {
        self.parts
            .iter()
            .zip(placements)
            .map(|(part, placed)| {
                let normals = compute_vertex_normals(&placed.surface, &part.triangles).ok()?;
                let t = &part.target;
                Some(Matches {
                    forward: match_vertices(&placed.surface, &normals, &t.surface, &t.normals, self.gamma),
                    backward: match_vertices(&t.surface, &t.normals, &placed.surface, &normals, self.gamma),
                    centerline: t
                        .centerline
                        .iter()
                        .map(|c| closest_segment(c, &placed.centerline, &part.segments))
                        .collect(),
                })
            })
            .collect()
    }

    pub fn regularization(&self, theta: &[Vec3]) -> f64 {
        self.regularizer
            .iter()
            .map(|row| row.iter().fold(Vec3::zeros(), |acc, &(j, c)| acc + theta[j] * c).norm_squared())
            .sum()
    }

    /// Distances `(d_s, d_c)` of one part under frozen correspondences.
    fn distances(&self, part: &Part, placed: &Placement, m: &Matches) -> (f64, f64) {
        let t = &part.target;
        let fwd: f64 = m.forward.iter().map(|p| (placed.surface[p.query] - t.surface[p.matched]).norm()).sum();
        let bwd: f64 = m.backward.iter().map(|p| (t.surface[p.query] - placed.surface[p.matched]).norm()).sum();
        let ds = fwd / placed.surface.len() as f64 + bwd / t.surface.len() as f64;
        let dc = if t.centerline.is_empty() {
            0.0
        } else {
            t.centerline
                .iter()
                .zip(&m.centerline)
                .map(|(c, sm)| (segment_point(&placed.centerline, &part.segments, sm) - c).norm())
                .sum::<f64>()
                / t.centerline.len() as f64
        };
        (ds, dc)
    }

    /// Objective with the given correspondences held fixed.
    pub fn frozen_breakdown(
        &self,
        theta: &[Vec3],
        placements: &[Placement],
        matches: &[Matches],
    ) -> ObjectiveBreakdown {
        let (mut surf, mut cl) = (0.0, 0.0);
        for ((part, placed), m) in self.parts.iter().zip(placements).zip(matches) {
            let (ds, dc) = self.distances(part, placed, m);
            surf += ds * ds;
            cl += self.alpha * dc * dc;
        }
        ObjectiveBreakdown::new(surf, cl, self.beta * self.regularization(theta))
    }

    /// Full evaluation with fresh correspondences; `None` if inadmissible.
    pub fn state(&self, theta: Vec<Vec3>) -> Option<State> {
        let placements = self.place(&theta)?;
        let matches = self.correspond(&placements)?;
        let breakdown = self.frozen_breakdown(&theta, &placements, &matches);
        Some(State { theta, placements, matches, breakdown })
    }

    /// Reweighted least-squares model of the objective around `theta` with
    /// correspondences frozen: returns `(H, G)` such that the model gradient
    /// is `2G` and its Hessian `2H`. At `theta` the model gradient equals the
    /// exact frozen-correspondence gradient.
    pub fn normal_equations(
        &self,
        theta: &[Vec3],
        placements: &[Placement],
        matches: &[Matches],
        with_hessian: bool,
    ) -> (Option<DMatrix<f64>>, DMatrix<f64>) {
        let n = self.controls;
        let mut h = with_hessian.then(|| DMatrix::<f64>::zeros(n, n));
        let mut g = DMatrix::<f64>::zeros(n, 3);
        let mut add = |row: &[(usize, f64)], w: f64, r: &Vec3, h: &mut Option<DMatrix<f64>>| {
            for &(a, ca) in row {
                for k in 0..3 {
                    g[(a, k)] += w * ca * r[k];
                }
                if let Some(h) = h.as_mut() {
                    for &(b, cb) in row {
                        h[(a, b)] += w * ca * cb;
                    }
                }
            }
        };
        for ((part, placed), m) in self.parts.iter().zip(placements).zip(matches) {
            let (ds, dc) = self.distances(part, placed, m);
            let t = &part.target;
            let (ns, nt) = (placed.surface.len() as f64, t.surface.len() as f64);
            let mut weight = vec![0.0; placed.surface.len()];
            let mut pull = vec![Vec3::zeros(); placed.surface.len()];
            for p in &m.forward {
                let r = placed.surface[p.query] - t.surface[p.matched];
                let w = ds / (ns * r.norm().max(RESIDUAL_FLOOR));
                weight[p.query] += w;
                pull[p.query] += r * w;
            }
            for p in &m.backward {
                let r = placed.surface[p.matched] - t.surface[p.query];
                let w = ds / (nt * r.norm().max(RESIDUAL_FLOOR));
                weight[p.matched] += w;
                pull[p.matched] += r * w;
            }
            for (j, row) in part.surface.rows.iter().enumerate() {
                if weight[j] == 0.0 {
                    continue;
                }
                // pull[j] = weight[j] · r_eff, so scale to reuse `add`
                let r_eff = pull[j] / weight[j];
                add(row, weight[j], &r_eff, &mut h);
            }
            if self.alpha > 0.0 && !t.centerline.is_empty() {
                let nc = t.centerline.len() as f64;
                for (c, sm) in t.centerline.iter().zip(&m.centerline) {
                    let r = segment_point(&placed.centerline, &part.segments, sm) - c;
                    let w = self.alpha * dc / (nc * r.norm().max(RESIDUAL_FLOOR));
                    let row = segment_row(&part.centerline.rows, &part.segments, sm);
                    add(&row, w, &r, &mut h);
                }
            }
        }
        if self.beta > 0.0 {
            for row in &self.regularizer {
                let lu = row.iter().fold(Vec3::zeros(), |acc, &(j, c)| acc + theta[j] * c);
                add(row, self.beta, &lu, &mut h);
            }
        }
        (h, g)
    }

    /// Exact gradient of the frozen-correspondence objective.
    pub fn frozen_gradient(&self, theta: &[Vec3], placements: &[Placement], matches: &[Matches]) -> Vec<Vec3> {
        let (_, g) = self.normal_equations(theta, placements, matches, false);
        (0..self.controls).map(|j| Vec3::new(g[(j, 0)], g[(j, 1)], g[(j, 2)]) * 2.0).collect()
    }

    /// Largest displacement a control update causes on surface or
    /// centerline points.
    pub fn max_displacement(&self, delta: &[Vec3]) -> f64 {
        self.parts
            .iter()
            .map(|p| p.surface.max_displacement(delta).max(p.centerline.max_displacement(delta)))
            .fold(0.0, f64::max)
    }
}

/// The objective at fixed correspondences, as a function of the control
/// vectors. Useful for checking gradients.
#[derive(Debug, Clone)]
pub struct FrozenObjective {
    problem: Problem,
    matches: Vec<Matches>,
}

impl FrozenObjective {
    pub(crate) fn at(problem: Problem, theta: Vec<Vec3>) -> Option<(Self, Vec<Vec3>)> {
        let state = problem.state(theta)?;
        Some((Self { problem, matches: state.matches }, state.theta))
    }

    pub fn controls(&self) -> usize {
        self.problem.controls
    }

    fn placements(&self, theta: &[Vec3]) -> Vec<Placement> {
        self.problem
            .parts
            .iter()
            .map(|p| Placement { surface: p.surface.eval(theta), centerline: p.centerline.eval(theta) })
            .collect()
    }

    pub fn value(&self, theta: &[Vec3]) -> ObjectiveBreakdown {
        self.problem.frozen_breakdown(theta, &self.placements(theta), &self.matches)
    }

    pub fn gradient(&self, theta: &[Vec3]) -> Vec<Vec3> {
        self.problem.frozen_gradient(theta, &self.placements(theta), &self.matches)
    }
}
