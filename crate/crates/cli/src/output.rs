//! CSV schemas. Column order is part of the interface.

use std::path::Path;

use pneumoreg_core::analysis::{field_records, DeformationField, FieldComponent, StrainReport};
use pneumoreg_core::distance::MetricReport;
use pneumoreg_core::registration::StepTrace;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    for row in rows {
        w.serialize(row).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(Error::csv(path))?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(Error::csv(path))
}

/// One row per lobe: MD, HD, CD mean, CD max, surface TRE, bronchus TRE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub case_id: String,
    pub lobe: String,
    pub md: f64,
    pub hd: f64,
    pub cd_mean: f64,
    pub cd_max: f64,
    pub tre_surface: Option<f64>,
    pub tre_bronchus: Option<f64>,
}

impl MetricRow {
    pub fn new(case_id: &str, lobe: &str, m: &MetricReport) -> Self {
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        Self {
            case_id: case_id.into(),
            lobe: lobe.into(),
            md: m.mean_distance,
            hd: m.hausdorff,
            cd_mean: m.centerline_mean,
            cd_max: m.centerline_max,
            tre_surface: mean(&m.tre_surface),
            tre_bronchus: mean(&m.tre_bronchus),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: String,
    pub iteration: usize,
    /// Empty for the starting state.
    pub accepted: Option<bool>,
    pub total: f64,
    pub surface_term: f64,
    pub centerline_term: f64,
    pub regularization_term: f64,
}

pub fn trace_rows(traces: &[StepTrace]) -> Vec<TraceRow> {
    traces
        .iter()
        .flat_map(|t| {
            t.objective.iter().enumerate().map(move |(i, o)| TraceRow {
                step: t.step.as_str().into(),
                iteration: i,
                accepted: i.checked_sub(1).map(|k| t.accepted[k]),
                total: o.total,
                surface_term: o.surface_term,
                centerline_term: o.centerline_term,
                regularization_term: o.regularization_term,
            })
        })
        .collect()
}

/// Origin (hilum at zero), vector and magnitude of one field point.
/// `radial` is the signed component along the origin direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub part: String,
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub magnitude: f64,
    pub radial: f64,
}

pub fn field_rows(field: &DeformationField, component: FieldComponent) -> Vec<FieldRow> {
    let ns = field.surface.len();
    field_records(field, component)
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            let (part, index) = if k < ns { ("surface", k) } else { ("centerline", k - ns) };
            let n = r.origin.norm();
            FieldRow {
                part: part.into(),
                index,
                x: r.origin.x,
                y: r.origin.y,
                z: r.origin.z,
                vx: r.vector.x,
                vy: r.vector.y,
                vz: r.vector.z,
                magnitude: r.magnitude,
                radial: if n > 0.0 { r.vector.dot(&r.origin) / n } else { 0.0 },
            }
        })
        .collect()
}

/// Plot data: reference distance against contraction for every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub case_id: String,
    pub lobe: String,
    pub branch: usize,
    pub kind: String,
    pub reference_distance: f64,
    pub contraction: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub case_id: String,
    pub lobe: String,
    pub branch: usize,
    pub bronchus_strain: f64,
    pub bronchus_intercept: f64,
    pub bronchus_residual: f64,
    pub parenchyma_strain: f64,
}

/// Bronchus and parenchyma mean ± SD per lobe, with the region comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub case_id: String,
    pub lobe: String,
    pub branches: usize,
    pub bronchus_mean: f64,
    pub bronchus_sd: f64,
    pub parenchyma_mean: f64,
    pub parenchyma_sd: f64,
    pub f: Option<f64>,
    pub p: Option<f64>,
}

pub fn strain_rows(case_id: &str, lobe: &str, r: &StrainReport) -> (Vec<SampleRow>, Vec<BranchRow>, SummaryRow) {
    let samples = r
        .samples
        .iter()
        .map(|s| SampleRow {
            case_id: case_id.into(),
            lobe: lobe.into(),
            branch: s.branch,
            kind: s.kind.as_str().into(),
            reference_distance: s.reference_distance,
            contraction: s.contraction,
            magnitude: s.magnitude(),
        })
        .collect();
    let branches = r
        .branches
        .iter()
        .map(|b| BranchRow {
            case_id: case_id.into(),
            lobe: lobe.into(),
            branch: b.branch,
            bronchus_strain: b.bronchus.slope.abs(),
            bronchus_intercept: b.bronchus.intercept,
            bronchus_residual: b.bronchus.residual,
            parenchyma_strain: b.parenchyma.abs(),
        })
        .collect();
    let summary = SummaryRow {
        case_id: case_id.into(),
        lobe: lobe.into(),
        branches: r.branches.len(),
        bronchus_mean: r.bronchus.mean,
        bronchus_sd: r.bronchus.sd,
        parenchyma_mean: r.parenchyma.mean,
        parenchyma_sd: r.parenchyma.sd,
        f: r.comparison.map(|c| c.f),
        p: r.comparison.map(|c| c.p),
    };
    (samples, branches, summary)
}
