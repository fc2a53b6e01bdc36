use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::field::{decompose_displacement, DeformationField, HILUM_EPS};
use super::stats::{compare_regions, RegionComparison};
use crate::distance::mean_sd;
use crate::error::{Error, Result};
use crate::geometry::primitives::ray_triangle;
use crate::geometry::{CenterlineTree, LobeModel, NodeKind, Point3, TriangleSurface, Vec3};

/// Where the ray from the hilum through a terminal leaves the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub triangle: usize,
    pub weights: [f64; 3],
    pub point: Point3,
}

/// The junctions and terminal on the path from the hilum to one terminal,
/// plus the surface point beyond it.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSampling {
    pub terminal: usize,
    pub nodes: Vec<usize>,
    pub surface: SurfaceHit,
}

const RAY_TOL: f64 = 1e-9;

pub fn sample_branch(tree: &CenterlineTree, terminal: usize, surface: &TriangleSurface) -> Result<BranchSampling> {
    if tree.nodes().get(terminal).map(|n| n.kind) != Some(NodeKind::Terminal) {
        return Err(Error::InvalidArgument(format!("node {terminal} is not a terminal")));
    }
    let nodes: Vec<usize> = tree
        .path_from_root(terminal)
        .into_iter()
        .filter(|&i| matches!(tree.nodes()[i].kind, NodeKind::Junction | NodeKind::Terminal))
        .collect();
    if nodes.len() < 2 {
        return Err(Error::InvalidArgument(format!("branch to terminal {terminal} has no junction")));
    }
    let origin = tree.hilum();
    let dir = tree.nodes()[terminal].position - origin;
    // the terminal sits at ray parameter 1; take the first exit at or beyond it
    let vs = surface.vertices();
    let hit = surface
        .triangles()
        .iter()
        .enumerate()
        .filter_map(|(k, t)| {
            ray_triangle(&origin, &dir, &vs[t[0]], &vs[t[1]], &vs[t[2]])
                .filter(|(s, _)| *s >= 1.0 - RAY_TOL / dir.norm())
                .map(|(s, w)| (s, k, w))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| Error::InvalidArgument(format!("ray through terminal {terminal} misses the surface")))?;
    let (s, triangle, weights) = hit;
    Ok(BranchSampling { terminal, nodes, surface: SurfaceHit { triangle, weights, point: origin + dir * s } })
}

pub fn cauchy_strain(length: f64, change: f64) -> Result<f64> {
    if !(length > 0.0) {
        return Err(Error::InvalidArgument(format!("reference length must be positive, got {length}")));
    }
    Ok(change / length)
}

/// Ordinary least-squares line; `residual` is the root-mean-square residual.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

pub fn regress_strain(samples: &[(f64, f64)]) -> Result<Regression> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("regression needs at least two samples".into()));
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx) * (s.0 - mx)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    if !(sxx > 1e-18 * (1.0 + mx * mx) * n) {
        return Err(Error::RankDeficient);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = samples.iter().map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(Regression { slope, intercept, residual: libm::sqrt(sse / n) })
}

/// Which state's hilum distance serves as the reference length `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StrainReference {
    #[default]
    Inflated,
    Deflated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PointKind {
    Junction,
    Terminal,
    Surface,
}

impl PointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PointKind::Junction => "junction",
            PointKind::Terminal => "terminal",
            PointKind::Surface => "surface",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainSample {
    /// Terminal node that names the branch.
    pub branch: usize,
    pub kind: PointKind,
    /// Hilum distance in the reference state, mm.
    pub reference_distance: f64,
    /// Signed radial displacement `|φv| − |v|`; negative towards the hilum.
    pub contraction: f64,
}

impl StrainSample {
    pub fn magnitude(&self) -> f64 {
        self.contraction.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchStrain {
    pub branch: usize,
    /// Contraction against hilum distance over the junctions and terminal.
    pub bronchus: Regression,
    /// Gradient between the terminal and the surface point.
    pub parenchyma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionSummary {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl RegionSummary {
    pub fn of(values: &[f64]) -> Self {
        let (mean, sd) = mean_sd(values);
        Self { mean, sd, count: values.len() }
    }
}

/// Strain magnitudes of one registered lobe; means are over branches.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainReport {
    pub reference: StrainReference,
    pub samples: Vec<StrainSample>,
    pub branches: Vec<BranchStrain>,
    /// Branches left out, with the reason.
    pub skipped: Vec<(usize, String)>,
    pub bronchus: RegionSummary,
    pub parenchyma: RegionSummary,
    pub comparison: Option<RegionComparison>,
}

impl StrainReport {
    pub fn bronchus_strains(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.bronchus.slope.abs()).collect()
    }

    pub fn parenchyma_strains(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.parenchyma.abs()).collect()
    }
}

fn sample_point(
    branch: usize,
    kind: PointKind,
    origin: &Vec3,
    u: &Vec3,
    reference: StrainReference,
) -> Option<StrainSample> {
    let moved = origin + u;
    let d = decompose_displacement(origin, &moved).ok()?;
    let contraction = d.contraction.dot(origin) / origin.norm();
    let reference_distance = match reference {
        StrainReference::Inflated => origin.norm(),
        StrainReference::Deflated => moved.norm(),
    };
    (reference_distance > HILUM_EPS).then_some(StrainSample { branch, kind, reference_distance, contraction })
}

/// Samples every branch of the source tree, decomposes the field at the
/// sampled points and regresses contraction against hilum distance.
pub fn strain_report(source: &LobeModel, field: &DeformationField, reference: StrainReference) -> Result<StrainReport> {
    let tree = source.centerline();
    if field.centerline.len() != tree.len() || field.surface.len() != source.surface().len() {
        return Err(Error::InvalidArgument("deformation field does not belong to the source model".into()));
    }
    let mut samples = Vec::new();
    let mut branches = Vec::new();
    let mut skipped = Vec::new();
    for terminal in tree.terminals() {
        let sampling = match sample_branch(tree, terminal, source.surface()) {
            Ok(s) => s,
            Err(e) => {
                skipped.push((terminal, format!("{e}")));
                continue;
            }
        };
        let mut own: Vec<StrainSample> = sampling
            .nodes
            .iter()
            .filter_map(|&i| {
                let kind = if i == terminal { PointKind::Terminal } else { PointKind::Junction };
                sample_point(terminal, kind, &field.centerline.origin[i], &field.centerline.displacement[i], reference)
            })
            .collect();
        let hit = &sampling.surface;
        let tri = source.surface().triangles()[hit.triangle];
        let u: Vec3 = (0..3).map(|k| field.surface.displacement[tri[k]] * hit.weights[k]).sum();
        let surface_sample = sample_point(terminal, PointKind::Surface, &(hit.point - field.hilum), &u, reference);

        let bronchus =
            match regress_strain(&own.iter().map(|s| (s.reference_distance, s.contraction)).collect::<Vec<_>>()) {
                Ok(r) => r,
                Err(e) => {
                    skipped.push((terminal, format!("bronchus regression: {e}")));
                    continue;
                }
            };
        let terminal_sample = own.iter().find(|s| s.kind == PointKind::Terminal).copied();
        let (Some(t), Some(s)) = (terminal_sample, surface_sample) else {
            skipped.push((terminal, "terminal or surface point at the hilum".into()));
            continue;
        };
        let span = s.reference_distance - t.reference_distance;
        if !(span > RAY_TOL) {
            skipped.push((terminal, "terminal lies on the surface".into()));
            continue;
        }
        let parenchyma = cauchy_strain(span, s.contraction - t.contraction)?;
        own.push(s);
        samples.extend(own);
        branches.push(BranchStrain { branch: terminal, bronchus, parenchyma });
    }
    if branches.is_empty() {
        return Err(Error::EmptyReport);
    }
    let mut report = StrainReport {
        reference,
        samples,
        branches,
        skipped,
        bronchus: RegionSummary { mean: 0.0, sd: 0.0, count: 0 },
        parenchyma: RegionSummary { mean: 0.0, sd: 0.0, count: 0 },
        comparison: None,
    };
    let (b, p) = (report.bronchus_strains(), report.parenchyma_strains());
    report.bronchus = RegionSummary::of(&b);
    report.parenchyma = RegionSummary::of(&p);
    report.comparison = compare_regions(&b, &p).ok();
    Ok(report)
}

/// Across-case summary: per-case means of each region and their comparison.
pub fn summarize_cases(reports: &[StrainReport]) -> Result<(RegionSummary, RegionSummary, RegionComparison)> {
    let b: Vec<f64> = reports.iter().map(|r| r.bronchus.mean).collect();
    let p: Vec<f64> = reports.iter().map(|r| r.parenchyma.mean).collect();
    Ok((RegionSummary::of(&b), RegionSummary::of(&p), compare_regions(&b, &p)?))
}
