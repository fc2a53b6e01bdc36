//! Construction of the control model for each step.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, Matrix3, Matrix4, Rotation3, SymmetricEigen, Unit};

use super::config::GridRegularization;
use super::objective::{affine_det, Guard, LinearMap, Part, Problem, Rows, Target};
use super::RegistrationConfig;
use crate::error::{Error, Result};
use crate::geometry::{
    bind_barycentric, BarycentricBinding, DeformationGrid, LaplacianOperator, LobeModel, Point3, TetrahedralMesh, Vec3,
};

/// Smallest admissible determinant of the affine part in STEP 1.
pub(crate) const MIN_AFFINE_DET: f64 = 0.01;

fn target_of(model: &LobeModel) -> Target {
    Target {
        surface: model.surface().vertices().to_vec(),
        normals: model.surface().normals().to_vec(),
        centerline: model.centerline().positions(),
    }
}

fn part(source: &LobeModel, target: &LobeModel, surface: Rows, tet: Rows, centerline: Rows) -> Part {
    Part {
        target: target_of(target),
        surface: LinearMap { base: source.surface().vertices().to_vec(), rows: surface },
        triangles: source.surface().triangles().to_vec(),
        tet: LinearMap { base: source.tet_mesh().vertices().to_vec(), rows: tet },
        tets: source.tet_mesh().tetrahedra().to_vec(),
        centerline: LinearMap { base: source.centerline().positions(), rows: centerline },
        segments: source.centerline().segments(),
        fold_reference: None,
    }
}

fn alpha_beta_gamma(config: &RegistrationConfig) -> (f64, f64, f64) {
    (config.alpha, config.beta, config.gamma)
}

/// STEP 1: `u(x) = F (x − h) + t` with `h` the (first) source hilum.
/// Controls 0..3 are the columns of `F`, control 3 is `t`.
pub(crate) fn affine_problem(pairs: &[(&LobeModel, &LobeModel)], config: &RegistrationConfig) -> (Problem, Vec<Vec3>) {
    let h = pairs[0].0.hilum();
    let rows = |pts: &[Point3]| -> Rows {
        pts.iter()
            .map(|p| {
                let d = p - h;
                vec![(0, d.x), (1, d.y), (2, d.z), (3, 1.0)]
            })
            .collect()
    };
    let parts = pairs
        .iter()
        .map(|(s, t)| {
            part(s, t, rows(s.surface().vertices()), rows(s.tet_mesh().vertices()), rows(&s.centerline().positions()))
        })
        .collect();
    let (alpha, _, gamma) = alpha_beta_gamma(config);
    let shift = pairs.iter().map(|(s, t)| t.hilum() - s.hilum()).fold(Vec3::zeros(), |a, b| a + b) / pairs.len() as f64;
    let problem = Problem {
        parts,
        controls: 4,
        regularizer: Vec::new(),
        alpha,
        beta: 0.0,
        gamma,
        guard: Guard::Affine { min_det: MIN_AFFINE_DET },
    };
    (problem, vec![Vec3::zeros(), Vec3::zeros(), Vec3::zeros(), shift])
}

fn controls_for(linear: &Matrix3<f64>, shift: Vec3) -> Vec<Vec3> {
    let f = linear - Matrix3::identity();
    vec![f.column(0).into(), f.column(1).into(), f.column(2).into(), shift]
}

fn principal_frame(points: &[Point3]) -> Option<Matrix3<f64>> {
    let c = points.iter().fold(Vec3::zeros(), |a, p| a + p) / points.len() as f64;
    let cov = points.iter().fold(Matrix3::zeros(), |a, p| a + (p - c) * (p - c).transpose());
    let eig = SymmetricEigen::new(cov);
    let mut order = [0, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut frame = Matrix3::from_columns(&[
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ]);
    if frame.determinant() < 0.0 {
        frame.column_mut(2).neg_mut();
    }
    frame.iter().all(|v| v.is_finite()).then_some(frame)
}

fn mean_direction(model: &LobeModel) -> Option<Vec3> {
    let h = model.hilum();
    let sum = model.centerline().positions().iter().fold(Vec3::zeros(), |a, p| a + (p - h));
    (sum.norm() > 1e-9).then(|| sum.normalize())
}

/// Candidate starting rotations for STEP 1: the identity, the four proper
/// alignments of the surfaces' principal axes, and alignments of the mean
/// branch direction combined with twists about it.
pub(crate) fn affine_starts(pairs: &[(&LobeModel, &LobeModel)], shift: Vec3) -> Vec<Vec<Vec3>> {
    let mut starts = vec![controls_for(&Matrix3::identity(), shift)];
    let (s, t) = pairs[0];
    if let (Some(fs), Some(ft)) = (principal_frame(s.surface().vertices()), principal_frame(t.surface().vertices())) {
        for signs in [[1.0, 1.0, 1.0], [-1.0, -1.0, 1.0], [-1.0, 1.0, -1.0], [1.0, -1.0, -1.0]] {
            let d = Matrix3::from_diagonal(&Vec3::from(signs));
            starts.push(controls_for(&(ft * d * fs.transpose()), shift));
        }
    }
    if let (Some(ds), Some(dt)) = (mean_direction(s), mean_direction(t)) {
        let align = Rotation3::rotation_between(&ds, &dt).unwrap_or_else(|| {
            let axis = if ds.x.abs() < 0.9 { ds.cross(&Vec3::x()) } else { ds.cross(&Vec3::y()) };
            Rotation3::from_axis_angle(&Unit::new_normalize(axis), core::f64::consts::PI)
        });
        for k in 0..TWISTS {
            let angle = 2.0 * core::f64::consts::PI * k as f64 / TWISTS as f64;
            let twist = Rotation3::from_axis_angle(&Unit::new_normalize(dt), angle);
            starts.push(controls_for((twist * align).matrix(), shift));
        }
    }
    starts
}

const TWISTS: usize = 12;

/// Homogeneous matrix of the STEP-1 map for controls `theta` about `h`.
pub(crate) fn affine_matrix(theta: &[Vec3], h: &Point3) -> Matrix4<f64> {
    debug_assert!(affine_det(theta) > 0.0);
    let a = Matrix3::from_columns(&[theta[0], theta[1], theta[2]]) + Matrix3::identity();
    let t = h + theta[3] - a * h;
    let mut m = a.to_homogeneous();
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
    m
}

fn binding_rows(bindings: &[BarycentricBinding], elements: &[[usize; 4]], offset: usize) -> Rows {
    bindings
        .iter()
        .map(|b| {
            let e = elements[b.element];
            (0..4).filter(|&k| b.weights[k] != 0.0).map(|k| (offset + e[k], b.weights[k])).collect()
        })
        .collect()
}

/// STEP 2: controls are the displacements of a tetrahedral grid around the
/// current models; every point follows its grid element barycentrically.
pub(crate) fn grid_problem(
    pairs: &[(&LobeModel, &LobeModel)],
    config: &RegistrationConfig,
) -> Result<(Problem, DeformationGrid)> {
    let all: Vec<Point3> = pairs.iter().flat_map(|(s, _)| s.all_points()).collect();
    let grid = DeformationGrid::build(&all, config.grid_cells, config.grid_margin_mm)?;
    let tets = grid.tetrahedra();
    let mut parts = Vec::new();
    let mut model_reg: Rows = Vec::new();
    for (s, t) in pairs {
        let bind = |pts: &[Point3]| -> Result<Rows> { Ok(binding_rows(&bind_barycentric(pts, &grid)?, tets, 0)) };
        let surface = bind(s.surface().vertices())?;
        if config.grid_regularization == GridRegularization::ModelVertices {
            let lap = LaplacianOperator::for_surface(s.surface(), config.surface_laplacian)?;
            for lrow in lap.matrix_rows() {
                let mut acc: Vec<(usize, f64)> = Vec::new();
                for (v, c) in lrow {
                    for &(j, w) in &surface[v] {
                        match acc.iter_mut().find(|e| e.0 == j) {
                            Some(e) => e.1 += c * w,
                            None => acc.push((j, c * w)),
                        }
                    }
                }
                model_reg.push(acc);
            }
        }
        let tet = bind(s.tet_mesh().vertices())?;
        let centerline = bind(&s.centerline().positions())?;
        parts.push(part(s, t, surface, tet, centerline));
    }
    let regularizer = match config.grid_regularization {
        GridRegularization::Grid => LaplacianOperator::uniform(&grid.vertex_adjacency()).matrix_rows(),
        GridRegularization::ModelVertices => model_reg,
    };
    let (alpha, beta, gamma) = alpha_beta_gamma(config);
    let problem = Problem {
        parts,
        controls: grid.rest_vertices().len(),
        regularizer,
        alpha,
        beta,
        gamma,
        guard: Guard::Grid { rest: grid.rest_vertices().to_vec(), tets: tets.to_vec() },
    };
    Ok((problem, grid))
}

/// Linear finite-element stiffness `K_ij = Σ_T |T| ∇φ_i·∇φ_j`, as sparse rows.
fn stiffness(tet: &TetrahedralMesh) -> Vec<Vec<(usize, f64)>> {
    let v = tet.vertices();
    let mut k: Vec<Vec<(usize, f64)>> = vec![Vec::new(); v.len()];
    for t in tet.tetrahedra() {
        let p = t.map(|i| v[i]);
        let d = Matrix3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
        let Some(inv) = d.try_inverse() else { continue };
        let vol = d.determinant().abs() / 6.0;
        let mut grad = [Vec3::zeros(); 4];
        for a in 0..3 {
            grad[a + 1] = inv.row(a).transpose();
        }
        grad[0] = -(grad[1] + grad[2] + grad[3]);
        for a in 0..4 {
            for b in 0..4 {
                let w = vol * grad[a].dot(&grad[b]);
                match k[t[a]].iter_mut().find(|e| e.0 == t[b]) {
                    Some(e) => e.1 += w,
                    None => k[t[a]].push((t[b], w)),
                }
            }
        }
    }
    k
}

/// Rows expressing every tet vertex displacement as the harmonic extension
/// (linear finite elements on the tet mesh, Dirichlet data on the boundary)
/// of the displacements of the surface vertices. Affine boundary data is
/// reproduced exactly.
pub(crate) fn harmonic_rows(tet: &TetrahedralMesh, offset: usize) -> Result<Rows> {
    let n = tet.vertices().len();
    let mut boundary = vec![None; n];
    for (s, &v) in tet.surface_vertices().iter().enumerate() {
        boundary[v] = Some(s);
    }
    let interior: Vec<usize> = (0..n).filter(|&v| boundary[v].is_none()).collect();
    let mut rows: Rows = boundary.iter().map(|b| b.map_or_else(Vec::new, |s| vec![(offset + s, 1.0)])).collect();
    if interior.is_empty() {
        return Ok(rows);
    }
    let mut slot = vec![usize::MAX; n];
    for (k, &v) in interior.iter().enumerate() {
        slot[v] = k;
    }
    let stiffness = stiffness(tet);
    let nb = tet.surface_vertices().len();
    let mut a_ii = DMatrix::<f64>::zeros(interior.len(), interior.len());
    let mut rhs = DMatrix::<f64>::zeros(interior.len(), nb);
    for (k, &v) in interior.iter().enumerate() {
        for &(u, w) in &stiffness[v] {
            match boundary[u] {
                Some(s) => rhs[(k, s)] -= w,
                None => a_ii[(k, slot[u])] += w,
            }
        }
    }
    let chol = a_ii
        .cholesky()
        .ok_or_else(|| Error::DegenerateGeometry("interior tet vertices are not connected to the boundary".into()))?;
    let x = chol.solve(&rhs);
    for (k, &v) in interior.iter().enumerate() {
        rows[v] = (0..nb).filter(|&s| x[(k, s)].abs() > 1e-14).map(|s| (offset + s, x[(k, s)])).collect();
    }
    Ok(rows)
}

/// STEP 3: controls are the surface vertex displacements. The tet mesh
/// follows harmonically and centerline nodes follow the tet mesh through
/// `centerline_bindings` (made against the original source tet mesh).
pub(crate) fn local_problem(
    pairs: &[(&LobeModel, &LobeModel)],
    centerline_bindings: &[&[BarycentricBinding]],
    config: &RegistrationConfig,
) -> Result<Problem> {
    let mut parts = Vec::new();
    let mut regularizer = Vec::new();
    let mut offset = 0;
    for ((s, t), bindings) in pairs.iter().zip(centerline_bindings) {
        let ns = s.surface().len();
        let surface: Rows = (0..ns).map(|j| vec![(offset + j, 1.0)]).collect();
        let tet = harmonic_rows(s.tet_mesh(), offset)?;
        let elements = s.tet_mesh().tetrahedra();
        let centerline: Rows = bindings
            .iter()
            .map(|b| {
                let mut acc: Vec<(usize, f64)> = Vec::new();
                for k in 0..4 {
                    let w = b.weights[k];
                    if w == 0.0 {
                        continue;
                    }
                    for &(j, c) in &tet[elements[b.element][k]] {
                        match acc.iter_mut().find(|e| e.0 == j) {
                            Some(e) => e.1 += w * c,
                            None => acc.push((j, w * c)),
                        }
                    }
                }
                acc
            })
            .collect();
        let lap = LaplacianOperator::for_surface(s.surface(), config.surface_laplacian)?;
        regularizer.extend(
            lap.matrix_rows().into_iter().map(|r| r.into_iter().map(|(j, c)| (offset + j, c)).collect::<Vec<_>>()),
        );
        let mut p = part(s, t, surface, tet, centerline);
        p.fold_reference = Some((0..s.surface().triangles().len()).map(|k| s.surface().triangle_normal(k)).collect());
        parts.push(p);
        offset += ns;
    }
    let alpha = if config.local_centerline_term { config.alpha } else { 0.0 };
    Ok(Problem {
        parts,
        controls: offset,
        regularizer,
        alpha,
        beta: config.beta,
        gamma: config.gamma,
        guard: Guard::None,
    })
}

/// Rebuilds each source model at the positions given by `theta`.
pub(crate) fn deformed_models(problem: &Problem, sources: &[&LobeModel], theta: &[Vec3]) -> Result<Vec<LobeModel>> {
    problem
        .parts
        .iter()
        .zip(sources)
        .map(|(p, s)| {
            s.with_positions(p.surface.eval(theta), p.tet.eval(theta), &p.centerline.eval(theta))
                .map_err(|e| Error::Optimization(format!("deformed model is degenerate: {e}")))
        })
        .collect()
}
